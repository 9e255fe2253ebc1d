#include "patchsurf/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "patchsurf/losses.hpp"

namespace patchsurf::metrics {

namespace {
constexpr double kRadToDeg = 57.295779513082320876798154814105;

void append_double(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "n/a";
        return;
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}
}  // namespace

double angular_error_degrees(const data::PointCloud& pred, const data::PointCloud& gt) {
    if (!pred.has_normals() || !gt.has_normals()) {
        throw std::invalid_argument("angular_error: both clouds must carry normals");
    }
    if (pred.size() == 0 || gt.size() == 0) {
        throw std::invalid_argument("angular_error: empty cloud");
    }
    const neighbors::KdIndex gt_index(gt.points);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto hit = gt_index.nearest(pred.points[i]);
        const double d = std::abs(dot(pred.normals[i], gt.normals[hit.index]));
        sum += std::acos(std::clamp(d, 0.0, 1.0));
    }
    return kRadToDeg * sum / static_cast<double>(pred.size());
}

int collapse_count(std::span<const double> areas, double c_A) {
    if (areas.empty()) throw std::invalid_argument("collapse_count: no areas");
    double mean = 0.0;
    for (const double a : areas) mean += a;
    mean /= static_cast<double>(areas.size());
    if (mean == 0.0) return static_cast<int>(areas.size());  // everything collapsed
    int count = 0;
    for (const double a : areas) {
        if (a < c_A * mean) ++count;
    }
    return count;
}

double overlap_count(std::span<const std::vector<Vec3>> pred_patches,
                     const data::PointCloud& gt, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("overlap_count: threshold must be positive");
    if (pred_patches.empty() || gt.size() == 0) {
        throw std::invalid_argument("overlap_count: empty input");
    }
    std::vector<neighbors::KdIndex> indices;
    indices.reserve(pred_patches.size());
    for (const auto& patch : pred_patches) indices.emplace_back(patch);
    double sum = 0.0;
    for (const auto& q : gt.points) {
        int within = 0;
        for (const auto& idx : indices) {
            if (idx.count_within(q, t) > 0) ++within;
        }
        sum += within;
    }
    return sum / static_cast<double>(gt.size());
}

CurvatureStats curvature_stats(std::span<const geometry::SurfacePoint> points) {
    if (points.empty()) throw std::invalid_argument("curvature_stats: no points");
    CurvatureStats s;
    int used = 0;
    for (const auto& p : points) {
        if (p.degenerate) {
            ++s.excluded;
            continue;
        }
        s.m_H += std::abs(p.c_mean);
        s.m_K += std::abs(p.c_gauss);
        ++used;
    }
    if (used == 0) throw std::domain_error("curvature_stats: every point is degenerate");
    s.m_H /= used;
    s.m_K /= used;
    return s;
}

std::optional<QuadricCurvature> quadric_curvature_oracle(const neighbors::KdIndex& index,
                                                         const Vec3& query, double radius) {
    const auto nbrs = index.collect_within(query, radius);
    if (nbrs.size() < 6) return std::nullopt;

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto i : nbrs) {
        const Vec3& p = index.points()[i];
        centroid += Eigen::Vector3d(p.x, p.y, p.z);
    }
    centroid /= static_cast<double>(nbrs.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto i : nbrs) {
        const Vec3& p = index.points()[i];
        const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - centroid;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    // Smallest-eigenvalue direction estimates the normal; its sign, and hence
    // the sign of the fitted mean curvature, is arbitrary.
    const Eigen::Vector3d n = eig.eigenvectors().col(0);
    const Eigen::Vector3d t1 = eig.eigenvectors().col(2);
    const Eigen::Vector3d t2 = eig.eigenvectors().col(1);

    const Eigen::Vector3d q(query.x, query.y, query.z);
    Eigen::MatrixXd A(nbrs.size(), 6);
    Eigen::VectorXd h(nbrs.size());
    for (std::size_t r = 0; r < nbrs.size(); ++r) {
        const Vec3& p = index.points()[nbrs[r]];
        const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - q;
        const double x = t1.dot(d);
        const double y = t2.dot(d);
        A(r, 0) = x * x;
        A(r, 1) = x * y;
        A(r, 2) = y * y;
        A(r, 3) = x;
        A(r, 4) = y;
        A(r, 5) = 1.0;
        h(r) = n.dot(d);
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(h);

    // Monge-form curvatures of h(x, y) at the query (x = y = 0).
    const double hx = c(3), hy = c(4);
    const double hxx = 2.0 * c(0), hxy = c(1), hyy = 2.0 * c(2);
    const double w = 1.0 + hx * hx + hy * hy;
    QuadricCurvature out;
    out.c_gauss = (hxx * hyy - hxy * hxy) / (w * w);
    out.c_mean = ((1.0 + hy * hy) * hxx - 2.0 * hx * hy * hxy + (1.0 + hx * hx) * hyy) /
                 (2.0 * std::pow(w, 1.5));
    return out;
}

std::optional<QuadricCurvature> quadric_curvature_oracle(const data::PointCloud& cloud,
                                                         const Vec3& query, double radius) {
    return quadric_curvature_oracle(neighbors::KdIndex(cloud.points), query, radius);
}

DistortionMap distortion_map(std::span<const surface::SurfaceMapping* const> patches,
                             const surface::Codeword& d, int resolution) {
    if (resolution < 2) throw std::invalid_argument("distortion_map: resolution must be >= 2");
    if (patches.empty()) throw std::invalid_argument("distortion_map: no patches");

    const int cells = resolution * resolution;
    const double step = 1.0 / (resolution - 1);

    struct Cell {
        geometry::MetricTensor g;
        bool degenerate;
    };
    std::vector<std::vector<Cell>> grids(patches.size());
    std::vector<double> areas(patches.size(), 0.0);
    double mu_E = 0.0, mu_G = 0.0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < patches.size(); ++k) {
        grids[k].reserve(cells);
        double area_sum = 0.0;
        for (int i = 0; i < resolution; ++i) {
            for (int j = 0; j < resolution; ++j) {
                const auto sp = geometry::surface_point(
                    patches[k]->evaluate(d, {i * step, j * step}));
                grids[k].push_back({sp.metric, sp.degenerate});
                area_sum += sp.area_element;
                if (!sp.degenerate) {
                    mu_E += sp.metric.E;
                    mu_G += sp.metric.G;
                    ++used;
                }
            }
        }
        areas[k] = area_sum / cells;
    }
    if (used == 0) throw std::domain_error("distortion_map: every grid point is degenerate");
    mu_E /= static_cast<double>(used);
    mu_G /= static_cast<double>(used);

    DistortionMap out;
    out.resolution = resolution;
    out.patches.resize(patches.size());
    for (std::size_t k = 0; k < patches.size(); ++k) {
        auto& pd = out.patches[k];
        pd.d_E.assign(cells, 0.0);
        pd.d_G.assign(cells, 0.0);
        pd.d_sk.assign(cells, 0.0);
        pd.d_str.assign(cells, 0.0);
        pd.degenerate.assign(cells, 0);
        const bool patch_dead = !(areas[k] > geometry::kDegenerateEps);
        const double inv_a = patch_dead ? 0.0 : 1.0 / areas[k];
        for (int c = 0; c < cells; ++c) {
            const auto& cell = grids[k][c];
            if (cell.degenerate || patch_dead) {
                pd.degenerate[c] = 1;
                continue;
            }
            const double e = (cell.g.E - mu_E) * inv_a;
            const double g = (cell.g.G - mu_G) * inv_a;
            const double f = cell.g.F * inv_a;
            const double s = (cell.g.E - cell.g.G) * inv_a;
            pd.d_E[c] = e * e;
            pd.d_G[c] = g * g;
            pd.d_sk[c] = f * f;
            pd.d_str[c] = s * s;
        }
    }
    return out;
}

MetricsReport evaluate(std::span<const surface::PatchDecoder> decoders,
                       const surface::Codeword& d, const data::PointCloud& gt,
                       const EvalConfig& cfg) {
    if (decoders.empty()) throw std::invalid_argument("evaluate: no decoders");
    if (gt.size() == 0) throw std::invalid_argument("evaluate: empty target cloud");
    const int res = cfg.grid_resolution;
    if (res < 2) throw std::invalid_argument("evaluate: grid resolution must be >= 2");

    const auto grid = surface::sample_uv_grid(res * res);
    MetricsReport rep;
    std::vector<std::vector<Vec3>> pred_patches(decoders.size());
    std::vector<geometry::SurfacePoint> all_points;
    all_points.reserve(decoders.size() * grid.size());
    data::PointCloud pred_normals_cloud;

    for (std::size_t k = 0; k < decoders.size(); ++k) {
        pred_patches[k].reserve(grid.size());
        double area_sum = 0.0;
        for (const auto& r : grid) {
            const auto sp = geometry::surface_point(surface::decode(decoders[k], d, r));
            pred_patches[k].push_back(sp.position);
            area_sum += sp.area_element;
            all_points.push_back(sp);
            if (!sp.degenerate) {
                pred_normals_cloud.points.push_back(sp.position);
                pred_normals_cloud.normals.push_back(sp.normal);
            }
        }
        rep.patch_areas.push_back(area_sum / static_cast<double>(grid.size()));
    }

    rep.chd = losses::chamfer(pred_patches, gt);
    if (gt.has_normals() && pred_normals_cloud.size() > 0) {
        rep.m_ae_deg = angular_error_degrees(pred_normals_cloud, gt);
    }
    try {
        const auto cs = curvature_stats(all_points);
        rep.m_H = cs.m_H;
        rep.m_K = cs.m_K;
        rep.degenerate_excluded = cs.excluded;
    } catch (const std::domain_error&) {
        rep.degenerate_excluded = static_cast<int>(all_points.size());
    }
    rep.m_col = collapse_count(rep.patch_areas, cfg.collapse_c_A);
    for (const double t : cfg.olap_thresholds) {
        rep.m_olap.emplace_back(t, overlap_count(pred_patches, gt, t));
    }
    return rep;
}

void write_report_table(std::ostream& out, const MetricsReport& rep) {
    const auto num = [](double v) -> std::string {
        if (std::isnan(v)) return "n/a";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6g", v);
        return buf;
    };
    out << "metric          value\n";
    out << "chd             " << num(rep.chd) << "\n";
    out << "m_ae [deg]      " << num(rep.m_ae_deg) << "\n";
    out << "m_H             " << num(rep.m_H) << "\n";
    out << "m_K             " << num(rep.m_K) << "\n";
    out << "m_col           " << rep.m_col << "\n";
    for (const auto& [t, v] : rep.m_olap) {
        out << "m_olap@" << num(t) << "    " << num(v) << "\n";
    }
    out << "degenerate_pts  " << rep.degenerate_excluded << "\n";
}

void write_report_tsv(const std::string& path, std::span<const std::string> shape_names,
                      std::span<const MetricsReport> reports) {
    if (shape_names.size() != reports.size()) {
        throw std::invalid_argument("write_report_tsv: one name per report required");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    std::string line = "shape\tchd\tm_ae_deg\tm_H\tm_K\tm_col";
    if (!reports.empty()) {
        for (const auto& [t, v] : reports[0].m_olap) {
            line += "\tm_olap@";
            append_double(line, t);
        }
    }
    line += "\tdegenerate_excluded\n";
    out << line;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        line.clear();
        line += shape_names[i];
        line += '\t';
        append_double(line, r.chd);
        line += '\t';
        append_double(line, r.m_ae_deg);
        line += '\t';
        append_double(line, r.m_H);
        line += '\t';
        append_double(line, r.m_K);
        line += '\t';
        line += std::to_string(r.m_col);
        for (const auto& [t, v] : r.m_olap) {
            line += '\t';
            append_double(line, v);
        }
        line += '\t';
        line += std::to_string(r.degenerate_excluded);
        line += '\n';
        out << line;
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace patchsurf::metrics
