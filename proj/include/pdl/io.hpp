#pragma once

/// File formats.
///
/// Binary container (field series and network parameters):
///
///   offset 0   8 bytes   magic, "PDLFIELD" or "PDLPARAM"
///   offset 8   u64 LE    header length H in bytes
///   offset 16  H bytes   UTF-8 JSON header
///   16 + H     u64 LE    value count N
///   24 + H     N x f64   values, IEEE-754 little endian
///
/// Field series values are ordered (time, x, y, z) row-major; parameter
/// values follow the flat layout described in network.hpp.
///
/// Sensor datasets are CSV with header
/// `x_idx,y_idx,z_idx,t_idx,x,y,z,t,psi_measured`, numbers printed with 17
/// significant digits so they round-trip exactly.

#include <pdl/core.hpp>
#include <pdl/dataset.hpp>
#include <pdl/grid.hpp>
#include <pdl/network.hpp>

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace pdl::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

using json = nlohmann::json;

inline constexpr std::string_view kFieldMagic = "PDLFIELD";
inline constexpr std::string_view kParamMagic = "PDLPARAM";

/// Shortest round-trip decimal representation.
inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes to a sibling temp file and renames, so readers never see a
/// partial file.
inline void write_atomically(const std::filesystem::path& path, std::string_view bytes)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot open " + tmp.string() + " for writing");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v)
{
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

inline std::uint64_t get_u64(std::string_view in, std::size_t& pos, const std::string& what)
{
    if (pos + 8 > in.size()) throw Error(what + ": truncated file");
    std::uint64_t v = 0;
    std::memcpy(&v, in.data() + pos, 8);
    pos += 8;
    return v;
}

inline std::string pack(std::string_view magic, const json& header, std::span<const double> values)
{
    const std::string h = header.dump();
    std::string out;
    out.reserve(24 + h.size() + 8 * values.size());
    out.append(magic);
    put_u64(out, h.size());
    out.append(h);
    put_u64(out, values.size());
    const auto* raw = reinterpret_cast<const char*>(values.data());
    out.append(raw, raw + 8 * values.size());
    return out;
}

inline std::pair<json, std::vector<double>> unpack(std::string_view bytes, std::string_view magic,
                                                   const std::string& what)
{
    if (bytes.size() < 8 || bytes.substr(0, 8) != magic) throw Error(what + ": bad magic");
    std::size_t pos = 8;
    const auto hlen = get_u64(bytes, pos, what);
    if (pos + hlen > bytes.size()) throw Error(what + ": truncated header");
    json header = json::parse(bytes.substr(pos, hlen));
    pos += hlen;
    const auto n = get_u64(bytes, pos, what);
    if (pos + 8 * n != bytes.size()) throw Error(what + ": value block size mismatch");
    std::vector<double> values(n);
    std::memcpy(values.data(), bytes.data() + pos, 8 * n);
    return {std::move(header), std::move(values)};
}

}  // namespace detail

inline json to_json(const VanGenuchtenParams& v)
{
    return {{"theta_r", v.theta_r}, {"theta_s", v.theta_s}, {"alpha", v.alpha}, {"n", v.n}, {"k_s", v.k_s}};
}

inline VanGenuchtenParams vg_from_json(const json& j)
{
    VanGenuchtenParams v;
    v.theta_r = j.at("theta_r").get<double>();
    v.theta_s = j.at("theta_s").get<double>();
    v.alpha = j.at("alpha").get<double>();
    v.n = j.at("n").get<double>();
    v.k_s = j.at("k_s").get<double>();
    return v;
}

inline json to_json(const Grid3D& g)
{
    return {{"nx", g.nx}, {"ny", g.ny}, {"nz", g.nz}, {"dx", g.dx}, {"dy", g.dy}, {"dz", g.dz}};
}

inline Grid3D grid_from_json(const json& j)
{
    Grid3D g;
    g.nx = j.at("nx").get<std::size_t>();
    g.ny = j.at("ny").get<std::size_t>();
    g.nz = j.at("nz").get<std::size_t>();
    g.dx = j.at("dx").get<double>();
    g.dy = j.at("dy").get<double>();
    g.dz = j.at("dz").get<double>();
    return g;
}

inline std::string encode_field(const FieldSeries& s)
{
    json h;
    h["format"] = "field_series";
    h["version"] = 1;
    h["layout"] = "time,x,y,z row-major";
    h["grid"] = to_json(s.grid);
    h["times"] = s.times;
    h["van_genuchten"] = to_json(s.vg);
    h["boundary_conditions"] = s.bc_description;
    h["mass_ledger"] = {{"initial_storage", s.ledger.initial_storage},
                        {"interval_inflow", s.ledger.interval_inflow}};
    return detail::pack(kFieldMagic, h, s.values);
}

inline FieldSeries decode_field(std::string_view bytes)
{
    auto [h, values] = detail::unpack(bytes, kFieldMagic, "field series");
    FieldSeries s;
    s.grid = grid_from_json(h.at("grid"));
    s.times = h.at("times").get<std::vector<double>>();
    s.vg = vg_from_json(h.at("van_genuchten"));
    s.bc_description = h.at("boundary_conditions").get<std::string>();
    if (h.contains("mass_ledger")) {
        s.ledger.initial_storage = h["mass_ledger"].at("initial_storage").get<double>();
        s.ledger.interval_inflow = h["mass_ledger"].at("interval_inflow").get<std::vector<double>>();
    }
    s.values = std::move(values);
    s.validate();
    return s;
}

inline void write_field(const std::filesystem::path& path, const FieldSeries& s) { write_atomically(path, encode_field(s)); }
inline FieldSeries read_field(const std::filesystem::path& path) { return decode_field(read_file(path)); }

inline std::string encode_params(const NetworkParams& p)
{
    json h;
    h["format"] = "network_params";
    h["version"] = 1;
    h["architecture"] = {{"input_dim", Architecture::input_dim},
                         {"hidden_layers", p.arch.hidden_layers},
                         {"hidden_width", p.arch.hidden_width},
                         {"activation", "tanh"}};
    h["layout"] = "per layer: weights row-major (out x in), then bias (out); hidden layers first";
    h["seed"] = p.seed;
    h["scaling"] = {{"box_lo", p.scaling.box.lo},
                    {"box_hi", p.scaling.box.hi},
                    {"out_shift", p.scaling.out_shift},
                    {"out_scale", p.scaling.out_scale}};
    return detail::pack(kParamMagic, h, p.values);
}

inline NetworkParams decode_params(std::string_view bytes)
{
    auto [h, values] = detail::unpack(bytes, kParamMagic, "network params");
    NetworkParams p;
    const auto& a = h.at("architecture");
    p.arch.hidden_layers = a.at("hidden_layers").get<std::size_t>();
    p.arch.hidden_width = a.at("hidden_width").get<std::size_t>();
    if (a.at("activation").get<std::string>() != "tanh") throw Error("network params: unsupported activation");
    p.arch.validate();
    p.seed = h.at("seed").get<std::uint64_t>();
    const auto& sc = h.at("scaling");
    p.scaling.box.lo = sc.at("box_lo").get<std::array<double, 4>>();
    p.scaling.box.hi = sc.at("box_hi").get<std::array<double, 4>>();
    p.scaling.out_shift = sc.at("out_shift").get<double>();
    p.scaling.out_scale = sc.at("out_scale").get<double>();
    if (values.size() != p.arch.parameter_count()) throw Error("network params: value count does not match architecture");
    p.values = std::move(values);
    return p;
}

inline void write_params(const std::filesystem::path& path, const NetworkParams& p) { write_atomically(path, encode_params(p)); }
inline NetworkParams read_params(const std::filesystem::path& path) { return decode_params(read_file(path)); }

inline constexpr std::string_view kSensorHeader = "x_idx,y_idx,z_idx,t_idx,x,y,z,t,psi_measured";

inline std::string encode_sensors(const SensorDataset& ds)
{
    std::string out(kSensorHeader);
    out += '\n';
    for (const auto& r : ds.records) {
        out += std::to_string(r.x_idx) + ',' + std::to_string(r.y_idx) + ',' + std::to_string(r.z_idx) + ',' +
               std::to_string(r.t_idx) + ',' + fmt(r.point.x) + ',' + fmt(r.point.y) + ',' + fmt(r.point.z) + ',' +
               fmt(r.point.t) + ',' + fmt(r.psi) + '\n';
    }
    return out;
}

inline SensorDataset decode_sensors(std::string_view text)
{
    SensorDataset ds;
    std::istringstream is{std::string(text)};
    std::string line;
    if (!std::getline(is, line) || line != kSensorHeader) throw Error("sensor file: unexpected header");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9) throw Error("sensor file line " + std::to_string(lineno) + ": expected 9 columns");
        try {
            SensorRecord r;
            r.x_idx = std::stoull(cells[0]);
            r.y_idx = std::stoull(cells[1]);
            r.z_idx = std::stoull(cells[2]);
            r.t_idx = std::stoull(cells[3]);
            r.point = {std::stod(cells[4]), std::stod(cells[5]), std::stod(cells[6]), std::stod(cells[7])};
            r.psi = std::stod(cells[8]);
            ds.records.push_back(r);
        } catch (const std::logic_error&) {
            throw Error("sensor file line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return ds;
}

inline void write_sensors(const std::filesystem::path& path, const SensorDataset& ds) { write_atomically(path, encode_sensors(ds)); }
inline SensorDataset read_sensors(const std::filesystem::path& path) { return decode_sensors(read_file(path)); }

}  // namespace pdl::io
