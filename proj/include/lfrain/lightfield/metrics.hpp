#pragma once

#include "lfrain/lightfield/lightfield.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lfrain {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE), reported as kPsnrCap when the images agree.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over every 8x8 window (stride 1, uniform weights). Three-channel
/// input is converted to luma first. Throws DomainError if the image is
/// smaller than the window.
double ssim(const Image& a, const Image& b, double peak = 1.0);

/// Rec. 601 luma for 3-channel images; single-channel images pass through.
Image to_gray(const Image& img);

struct ViewMetric {
    std::string scene;
    std::string view_u, view_v;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

/// Per-view metrics for one aligned pair of light fields.
std::vector<ViewMetric> evaluate_views(const std::string& scene, const LightField& restored, const LightField& truth);

/// Appends the summary rows: ("mean", "all", "all") averages views within a
/// scene then scenes; ("mean", "center", "center") averages center views.
std::vector<ViewMetric> with_summary(std::vector<ViewMetric> rows, const std::vector<std::size_t>& center_rows);

/// CSV with header scene,view_u,view_v,psnr_db,ssim.
void write_metrics_csv(std::ostream& os, const std::vector<ViewMetric>& rows);

} // namespace lfrain
