#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "hchc/gldc.hpp"
#include "hchc/layout.hpp"

namespace hchc {

/// Fixed 16-colour palette; sample i is drawn in palette[label % 16].
inline constexpr std::array<std::string_view, 16> kPalette{
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd"};

struct SvgStyle {
    int width_px = 900;
};

/// Maps layout (math) coordinates to SVG pixels: centre of the canvas,
/// y pointing up, the circle inset by a 5% margin on each side.
struct SvgTransform {
    double center = 0.0;
    double scale = 0.0;

    SvgTransform(const SvgStyle& style, double radius);
    Point2 apply(const Point2& p) const { return {center + p.x * scale, center - p.y * scale}; }
};

/// Circle outline, one red anchor per cluster labelled with its id, one dot
/// per sample coloured by its assigned cluster, outliers as hollow rings.
/// Output bytes depend only on the inputs.
std::string svg_document(const CircularLayout& layout, const Labels& assigned, const SvgStyle& style = {});

void render_svg(const CircularLayout& layout, const Labels& assigned, const std::filesystem::path& out_path,
                const SvgStyle& style = {});

}  // namespace hchc
