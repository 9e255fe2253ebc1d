#include "patchsurf/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>

#include "patchsurf/geometry.hpp"
#include "patchsurf/surface.hpp"

namespace patchsurf::data {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;

void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

double parse_double(std::string_view tok, const std::string& path, int line) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw ParseError(path + ":" + std::to_string(line) + ": bad number '" + std::string(tok) + "'");
    }
    return v;
}

long parse_long(std::string_view tok, const std::string& path, int line) {
    long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw ParseError(path + ":" + std::to_string(line) + ": bad integer '" + std::string(tok) + "'");
    }
    return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) toks.push_back(s.substr(i, j - i));
        i = j;
    }
    return toks;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

}  // namespace

void PointCloud::validate() const {
    if (!normals.empty() && normals.size() != points.size()) {
        throw std::invalid_argument("point cloud: normals length differs from points");
    }
    if (!patch_ids.empty() && patch_ids.size() != points.size()) {
        throw std::invalid_argument("point cloud: patch_ids length differs from points");
    }
    for (const auto& n : normals) {
        if (std::abs(norm(n) - 1.0) > 1e-9) {
            throw std::invalid_argument("point cloud: normal is not unit length");
        }
    }
}

const Aabb& PointCloud::bounding_box() const {
    if (!bbox_) {
        Aabb box;
        if (!points.empty()) {
            box.lo = box.hi = points[0];
            for (const auto& p : points) {
                box.lo = {std::min(box.lo.x, p.x), std::min(box.lo.y, p.y), std::min(box.lo.z, p.z)};
                box.hi = {std::max(box.hi.x, p.x), std::max(box.hi.y, p.y), std::max(box.hi.z, p.z)};
            }
        }
        bbox_ = box;
    }
    return *bbox_;
}

SurfaceKind surface_kind_from_string(const std::string& name) {
    if (name == "plane") return SurfaceKind::kPlane;
    if (name == "sphere-cap") return SurfaceKind::kSphereCap;
    if (name == "cylinder") return SurfaceKind::kCylinder;
    if (name == "wavy-cloth") return SurfaceKind::kWavyCloth;
    throw std::invalid_argument("unknown surface kind: " + name);
}

std::string to_string(SurfaceKind kind) {
    switch (kind) {
    case SurfaceKind::kPlane: return "plane";
    case SurfaceKind::kSphereCap: return "sphere-cap";
    case SurfaceKind::kCylinder: return "cylinder";
    case SurfaceKind::kWavyCloth: return "wavy-cloth";
    }
    return "?";
}

namespace {

double wavy_cloth_quadrature_area(double amplitude, double frequency) {
    // 512^2 midpoint rule over the unit square.
    const int n = 512;
    const auto mapping = surface::analytic_wavy_cloth(amplitude, frequency);
    const surface::Codeword none;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const surface::UvPoint r{(i + 0.5) / n, (j + 0.5) / n};
            const auto jets = mapping.evaluate(none, r);
            const Vec3 f_u = {jets[0].du, jets[1].du, jets[2].du};
            const Vec3 f_v = {jets[0].dv, jets[1].dv, jets[2].dv};
            sum += std::sqrt(dot(f_u, f_u) * dot(f_v, f_v) - dot(f_u, f_v) * dot(f_u, f_v));
        }
    }
    return sum / (static_cast<double>(n) * n);
}

}  // namespace

Dataset generate(const SyntheticSurfaceSpec& spec) {
    if (spec.count < 1) throw std::invalid_argument("generate: need count >= 1");
    if (spec.noise_sigma < 0) throw std::invalid_argument("generate: noise sigma must be >= 0");
    if (spec.amplitude < 0) throw std::invalid_argument("generate: amplitude must be >= 0");

    const double elev_max = kPi / 3.0;
    std::unique_ptr<surface::AnalyticSurface> mapping;
    double area = 0.0;
    switch (spec.kind) {
    case SurfaceKind::kPlane:
        mapping = std::make_unique<surface::AnalyticSurface>(surface::analytic_plane());
        area = 1.0;
        break;
    case SurfaceKind::kSphereCap:
        mapping = std::make_unique<surface::AnalyticSurface>(surface::analytic_sphere(1.0));
        area = kPi * std::sin(elev_max);  // integral of cos(v) over the band
        break;
    case SurfaceKind::kCylinder:
        mapping = std::make_unique<surface::AnalyticSurface>(surface::analytic_cylinder(0.5));
        area = 0.5 * kPi;
        break;
    case SurfaceKind::kWavyCloth:
        mapping = std::make_unique<surface::AnalyticSurface>(
            surface::analytic_wavy_cloth(spec.amplitude, spec.frequency));
        area = wavy_cloth_quadrature_area(spec.amplitude, spec.frequency);
        break;
    }

    Dataset ds;
    ds.gt_area = area;
    ds.cloud.points.reserve(spec.count);
    ds.cloud.normals.reserve(spec.count);
    ds.gt_c_mean.reserve(spec.count);
    ds.gt_c_gauss.reserve(spec.count);

    Rng uv_rng(spec.seed);
    const surface::Codeword none;
    for (int i = 0; i < spec.count; ++i) {
        surface::UvPoint r;
        switch (spec.kind) {
        case SurfaceKind::kPlane:
        case SurfaceKind::kWavyCloth:
            r = {uv_rng.uniform(), uv_rng.uniform()};
            break;
        case SurfaceKind::kSphereCap:
            // area element is cos(v): uniform in (u, sin v) is area-uniform
            r.u = uv_rng.uniform(0.0, kPi);
            r.v = std::asin(uv_rng.uniform(0.0, std::sin(elev_max)));
            break;
        case SurfaceKind::kCylinder:
            // constant area element: uniform in (u, v) is area-uniform
            r.u = uv_rng.uniform(0.0, kPi);
            r.v = uv_rng.uniform();
            break;
        }
        const auto sp = geometry::surface_point(mapping->evaluate(none, r));
        ds.cloud.points.push_back(sp.position);
        ds.cloud.normals.push_back(sp.normal);
        ds.gt_c_mean.push_back(sp.c_mean);
        ds.gt_c_gauss.push_back(sp.c_gauss);
    }

    if (spec.noise_sigma > 0.0) {
        // Separate stream so clean positions are identical across sigma choices.
        Rng noise_rng(mix_seed(spec.seed, 1));
        for (auto& p : ds.cloud.points) {
            p.x += spec.noise_sigma * noise_rng.normal();
            p.y += spec.noise_sigma * noise_rng.normal();
            p.z += spec.noise_sigma * noise_rng.normal();
        }
    }
    return ds;
}

double triangulated_area(std::span<const Vec3> vertices,
                         std::span<const std::array<int, 3>> triangles) {
    const int n = static_cast<int>(vertices.size());
    double area = 0.0;
    for (const auto& t : triangles) {
        for (const int idx : t) {
            if (idx < 0 || idx >= n) {
                throw std::invalid_argument("triangulated_area: vertex index out of range");
            }
        }
        const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
        const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
        area += 0.5 * norm(cross(e1, e2));
    }
    return area;
}

// --- OBJ ---------------------------------------------------------------------

ObjLoadResult load_obj(const std::string& path) {
    std::ifstream in = open_in(path);
    ObjLoadResult res;
    std::vector<Vec3> normals;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = split_ws(line);
        if (toks.empty() || toks[0][0] == '#') continue;
        if (toks[0] == "v" || toks[0] == "vn") {
            if (toks.size() < 4) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": expected 3 coordinates");
            }
            const Vec3 p{parse_double(toks[1], path, lineno),
                         parse_double(toks[2], path, lineno),
                         parse_double(toks[3], path, lineno)};
            if (toks[0] == "v") {
                res.cloud.points.push_back(p);
            } else {
                normals.push_back(p);
            }
        } else {
            ++res.skipped_directives;
        }
    }
    if (!normals.empty()) {
        if (normals.size() != res.cloud.points.size()) {
            throw ParseError(path + ": vn count (" + std::to_string(normals.size()) +
                             ") does not match v count (" + std::to_string(res.cloud.points.size()) + ")");
        }
        res.cloud.normals = std::move(normals);
    }
    return res;
}

namespace {

// Writers only require consistent lengths; unit normals are the loader's and
// generator's contract (export flags degenerate points with zero normals).
void check_lengths(const PointCloud& cloud, const char* who) {
    if (!cloud.normals.empty() && cloud.normals.size() != cloud.points.size()) {
        throw std::invalid_argument(std::string(who) + ": normals length differs from points");
    }
    if (!cloud.patch_ids.empty() && cloud.patch_ids.size() != cloud.points.size()) {
        throw std::invalid_argument(std::string(who) + ": patch_ids length differs from points");
    }
}

}  // namespace

void save_obj(const std::string& path, const PointCloud& cloud) {
    check_lengths(cloud, "save_obj");
    std::ofstream out = open_out(path);
    std::string buf;
    for (const auto& p : cloud.points) {
        buf.clear();
        buf += "v ";
        append_double(buf, p.x);
        buf += ' ';
        append_double(buf, p.y);
        buf += ' ';
        append_double(buf, p.z);
        buf += '\n';
        out << buf;
    }
    for (const auto& n : cloud.normals) {
        buf.clear();
        buf += "vn ";
        append_double(buf, n.x);
        buf += ' ';
        append_double(buf, n.y);
        buf += ' ';
        append_double(buf, n.z);
        buf += '\n';
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

// --- PLY ---------------------------------------------------------------------

PointCloud load_ply(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    int lineno = 0;

    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++lineno;
        return true;
    };

    if (!next_line() || split_ws(line) != std::vector<std::string_view>{"ply"}) {
        throw ParseError(path + ":1: not a PLY file");
    }

    long vertex_count = -1;
    std::vector<std::string> vertex_props;
    std::vector<long> other_element_rows;  // rows to skip after vertices
    bool in_vertex_element = false;
    bool before_vertex = true;
    long rows_before_vertex = 0;

    while (true) {
        if (!next_line()) throw ParseError(path + ": unexpected end of header");
        const auto toks = split_ws(line);
        if (toks.empty() || toks[0] == "comment") continue;
        if (toks[0] == "format") {
            if (toks.size() < 3 || toks[1] != "ascii" || toks[2] != "1.0") {
                throw ParseError(path + ":" + std::to_string(lineno) + ": only 'format ascii 1.0' is supported");
            }
        } else if (toks[0] == "element") {
            if (toks.size() < 3) throw ParseError(path + ":" + std::to_string(lineno) + ": bad element line");
            const long count = parse_long(toks[2], path, lineno);
            if (toks[1] == "vertex") {
                vertex_count = count;
                in_vertex_element = true;
                before_vertex = false;
            } else {
                in_vertex_element = false;
                if (before_vertex) rows_before_vertex += count;
                else other_element_rows.push_back(count);
            }
        } else if (toks[0] == "property") {
            if (in_vertex_element) {
                if (toks.size() < 3) throw ParseError(path + ":" + std::to_string(lineno) + ": bad property line");
                if (toks[1] == "list") {
                    throw ParseError(path + ":" + std::to_string(lineno) + ": list properties on vertices are not supported");
                }
                vertex_props.emplace_back(toks.back());
            }
        } else if (toks[0] == "end_header") {
            break;
        } else {
            throw ParseError(path + ":" + std::to_string(lineno) + ": unknown header line '" + std::string(toks[0]) + "'");
        }
    }
    if (vertex_count < 0) throw ParseError(path + ": no vertex element");

    auto prop_index = [&](const char* name) -> int {
        for (std::size_t i = 0; i < vertex_props.size(); ++i) {
            if (vertex_props[i] == name) return static_cast<int>(i);
        }
        return -1;
    };
    const int ix = prop_index("x"), iy = prop_index("y"), iz = prop_index("z");
    if (ix < 0 || iy < 0 || iz < 0) throw ParseError(path + ": vertex element lacks x/y/z properties");
    const int inx = prop_index("nx"), iny = prop_index("ny"), inz = prop_index("nz");
    const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;
    const int ipid = prop_index("patch_id");

    for (long i = 0; i < rows_before_vertex; ++i) {
        if (!next_line()) throw ParseError(path + ": unexpected end of file");
    }

    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    if (with_normals) cloud.normals.reserve(vertex_count);
    for (long i = 0; i < vertex_count; ++i) {
        if (!next_line()) throw ParseError(path + ": unexpected end of file in vertex data");
        const auto toks = split_ws(line);
        if (toks.size() != vertex_props.size()) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(vertex_props.size()) + " values, got " + std::to_string(toks.size()));
        }
        cloud.points.push_back({parse_double(toks[ix], path, lineno),
                                parse_double(toks[iy], path, lineno),
                                parse_double(toks[iz], path, lineno)});
        if (with_normals) {
            cloud.normals.push_back({parse_double(toks[inx], path, lineno),
                                     parse_double(toks[iny], path, lineno),
                                     parse_double(toks[inz], path, lineno)});
        }
        if (ipid >= 0) cloud.patch_ids.push_back(static_cast<int>(parse_long(toks[ipid], path, lineno)));
    }
    return cloud;
}

void save_ply(const std::string& path, const PointCloud& cloud, const PlyExtras& extras) {
    check_lengths(cloud, "save_ply");
    for (const auto& [name, values] : extras) {
        if (values.size() != cloud.size()) {
            throw std::invalid_argument("save_ply: extra property '" + name + "' length differs from points");
        }
    }
    std::ofstream out = open_out(path);
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (cloud.has_normals()) {
        out << "property double nx\nproperty double ny\nproperty double nz\n";
    }
    if (cloud.has_patch_ids()) out << "property int patch_id\n";
    for (const auto& [name, values] : extras) out << "property double " << name << "\n";
    out << "end_header\n";

    std::string buf;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        buf.clear();
        append_double(buf, cloud.points[i].x);
        buf += ' ';
        append_double(buf, cloud.points[i].y);
        buf += ' ';
        append_double(buf, cloud.points[i].z);
        if (cloud.has_normals()) {
            buf += ' ';
            append_double(buf, cloud.normals[i].x);
            buf += ' ';
            append_double(buf, cloud.normals[i].y);
            buf += ' ';
            append_double(buf, cloud.normals[i].z);
        }
        if (cloud.has_patch_ids()) {
            buf += ' ';
            buf += std::to_string(cloud.patch_ids[i]);
        }
        for (const auto& [name, values] : extras) {
            buf += ' ';
            append_double(buf, values[i]);
        }
        buf += '\n';
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void save_area_sidecar(const std::string& path, double area) {
    std::ofstream out = open_out(path);
    std::string buf;
    append_double(buf, area);
    out << buf << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

double load_area_sidecar(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: empty area file");
    const auto toks = split_ws(line);
    if (toks.size() != 1) throw ParseError(path + ":1: expected a single value");
    return parse_double(toks[0], path, 1);
}

}  // namespace patchsurf::data
