#include "lfrain/lightfield/metrics.hpp"

#include "lfrain/errors.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

namespace lfrain {

namespace {

void require_same(const Image& a, const Image& b) {
    if (a.channels != b.channels || a.height != b.height || a.width != b.width) {
        throw ShapeError("image shapes differ: " + std::to_string(a.channels) + "x" + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.channels) + "x" +
                         std::to_string(b.height) + "x" + std::to_string(b.width));
    }
}

constexpr std::size_t kWindow = 8;

} // namespace

double psnr(const Image& a, const Image& b, double peak) {
    require_same(a, b);
    if (!(peak > 0.0)) throw DomainError("psnr peak must be positive");
    if (a.data.empty()) throw DomainError("psnr of empty images");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

Image to_gray(const Image& img) {
    if (img.channels == 1) return img;
    if (img.channels != 3) throw ShapeError("grayscale conversion needs 1 or 3 channels");
    Image g(1, img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            g.at(0, y, x) = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
    return g;
}

double ssim(const Image& a_in, const Image& b_in, double peak) {
    require_same(a_in, b_in);
    if (a_in.height < kWindow || a_in.width < kWindow) {
        throw DomainError("ssim needs images of at least 8x8 pixels");
    }
    const Image a = to_gray(a_in), b = to_gray(b_in);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const double n = static_cast<double>(kWindow * kWindow);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y0 = 0; y0 + kWindow <= a.height; ++y0)
        for (std::size_t x0 = 0; x0 + kWindow <= a.width; ++x0) {
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t y = y0; y < y0 + kWindow; ++y)
                for (std::size_t x = x0; x < x0 + kWindow; ++x) {
                    const double p = a.at(0, y, x), q = b.at(0, y, x);
                    sa += p;
                    sb += q;
                    saa += p * p;
                    sbb += q * q;
                    sab += p * q;
                }
            const double ma = sa / n, mb = sb / n;
            const double va = std::max(0.0, saa / n - ma * ma);
            const double vb = std::max(0.0, sbb / n - mb * mb);
            const double cov = sab / n - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

std::vector<ViewMetric> evaluate_views(const std::string& scene, const LightField& restored, const LightField& truth) {
    if (!restored.same_extents(truth)) throw ShapeError("light fields for scene '" + scene + "' are not aligned");
    std::vector<ViewMetric> rows;
    for (std::size_t u = 0; u < truth.rows(); ++u)
        for (std::size_t v = 0; v < truth.cols(); ++v) {
            const Image a = restored.view(u, v), b = truth.view(u, v);
            rows.push_back({scene, std::to_string(u), std::to_string(v), psnr(a, b), ssim(a, b)});
        }
    return rows;
}

std::vector<ViewMetric> with_summary(std::vector<ViewMetric> rows, const std::vector<std::size_t>& center_rows) {
    if (rows.empty()) return rows;
    std::map<std::string, std::pair<std::pair<double, double>, std::size_t>> per_scene;
    std::vector<std::string> order;
    for (const ViewMetric& r : rows) {
        auto [it, inserted] = per_scene.try_emplace(r.scene);
        if (inserted) order.push_back(r.scene);
        it->second.first.first += r.psnr_db;
        it->second.first.second += r.ssim;
        ++it->second.second;
    }
    double mp = 0, ms = 0;
    for (const std::string& s : order) {
        const auto& [sums, n] = per_scene.at(s);
        mp += sums.first / static_cast<double>(n);
        ms += sums.second / static_cast<double>(n);
    }
    const double scenes = static_cast<double>(order.size());
    double cp = 0, cs = 0;
    for (std::size_t i : center_rows) {
        cp += rows.at(i).psnr_db;
        cs += rows.at(i).ssim;
    }
    rows.push_back({"mean", "all", "all", mp / scenes, ms / scenes});
    if (!center_rows.empty()) {
        const double nc = static_cast<double>(center_rows.size());
        rows.push_back({"mean", "center", "center", cp / nc, cs / nc});
    }
    return rows;
}

void write_metrics_csv(std::ostream& os, const std::vector<ViewMetric>& rows) {
    os << "scene,view_u,view_v,psnr_db,ssim\n";
    os << std::setprecision(10);
    for (const ViewMetric& r : rows) {
        os << r.scene << ',' << r.view_u << ',' << r.view_v << ',' << r.psnr_db << ',' << r.ssim << '\n';
    }
}

} // namespace lfrain
