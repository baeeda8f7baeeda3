#include "hchc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hchc/errors.hpp"
#include "hchc/io.hpp"

namespace hchc {

namespace {

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    if (s == "-0.000") s = "0.000";
    return s;
}

}  // namespace

SvgTransform::SvgTransform(const SvgStyle& style, double radius) {
    if (style.width_px <= 0) throw InputError("svg: width must be positive");
    if (!(radius > 0.0)) throw InputError("svg: radius must be positive");
    center = style.width_px / 2.0;
    scale = center * 0.9 / radius;
}

std::string svg_document(const CircularLayout& layout, const Labels& assigned, const SvgStyle& style) {
    if (assigned.size() != layout.sample_coords.size() || layout.outlier_flags.size() != layout.sample_coords.size()) {
        throw InputError("svg: one label and one outlier flag per sample required");
    }
    if (layout.anchor_coords.size() != layout.cycle.order.size()) {
        throw InputError("svg: one anchor per cycle position required");
    }
    const SvgTransform tf(style, layout.radius);
    const std::string w = std::to_string(style.width_px);
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + w + "\" height=\"" + w + "\" viewBox=\"0 0 " + w +
           " " + w + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<circle class=\"outline\" cx=\"" + px(tf.center) + "\" cy=\"" + px(tf.center) + "\" r=\"" +
           px(layout.radius * tf.scale) + "\" fill=\"none\" stroke=\"red\" stroke-width=\"1.5\"/>\n";

    out += "<g class=\"samples\">\n";
    for (std::size_t i = 0; i < layout.sample_coords.size(); ++i) {
        const Point2 p = tf.apply(layout.sample_coords[i]);
        const std::string_view colour = kPalette[static_cast<std::size_t>(assigned[i]) % kPalette.size()];
        if (layout.outlier_flags[i]) {
            out += "<circle class=\"outlier\" cx=\"" + px(p.x) + "\" cy=\"" + px(p.y) +
                   "\" r=\"3.5\" fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.2\"/>\n";
        } else {
            out += "<circle class=\"sample\" cx=\"" + px(p.x) + "\" cy=\"" + px(p.y) + "\" r=\"2.5\" fill=\"" +
                   std::string(colour) + "\" fill-opacity=\"0.8\"/>\n";
        }
    }
    out += "</g>\n";

    out += "<g class=\"anchors\">\n";
    for (std::size_t pos = 0; pos < layout.anchor_coords.size(); ++pos) {
        const Point2& a = layout.anchor_coords[pos];
        const Point2 p = tf.apply(a);
        // Label sits just outside the circle along the anchor's direction.
        const double norm = std::max(1e-12, std::hypot(a.x, a.y));
        const Point2 q = tf.apply({a.x + 0.06 * layout.radius * a.x / norm, a.y + 0.06 * layout.radius * a.y / norm});
        out += "<circle class=\"anchor\" cx=\"" + px(p.x) + "\" cy=\"" + px(p.y) + "\" r=\"6\" fill=\"red\"/>\n";
        out += "<text x=\"" + px(q.x) + "\" y=\"" + px(q.y) +
               "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" dominant-baseline=\"middle\">" +
               std::to_string(layout.cycle.order[pos]) + "</text>\n";
    }
    out += "</g>\n</svg>\n";
    return out;
}

void render_svg(const CircularLayout& layout, const Labels& assigned, const std::filesystem::path& out_path,
                const SvgStyle& style) {
    write_text_file(out_path, svg_document(layout, assigned, style));
}

}  // namespace hchc
