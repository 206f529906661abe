#include "csn/exports.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csn/csv.hpp"
#include "csn/error.hpp"

namespace csn::exports {

double ViewState::draw_extent() const {
    return thumb_size * std::pow(zoom, thumb_scale) * canvas_px / kReferenceCanvas;
}

int ViewState::draw_size() const { return std::max(1, static_cast<int>(std::lround(draw_extent()))); }

void ViewState::validate() const {
    if (!(zoom > 0.0) || !std::isfinite(zoom)) throw InvalidArgument("view: zoom must be positive");
    if (canvas_px < 64) throw InvalidArgument("view: canvas_px must be at least 64");
    if (canvas_px > 16384) throw InvalidArgument("view: canvas_px must not exceed 16384");
    if (!(thumb_size > 0.0) || thumb_size > 4096) throw InvalidArgument("view: thumb_size out of range");
    if (!(thumb_scale >= 0.0) || thumb_scale > 4.0) throw InvalidArgument("view: thumb_scale out of range");
    if (!std::isfinite(center_x) || !std::isfinite(center_y)) throw InvalidArgument("view: center must be finite");
    if (thumb_size * std::pow(zoom, thumb_scale) > 4 * kReferenceCanvas) throw InvalidArgument("view: thumbnails larger than the canvas");
}

std::string export_csv(const MetadataTable& table, const SelectionMask& mask) {
    if (!table.fields.empty() && table.row_count() != mask.size())
        throw InvalidArgument("mask length differs from metadata row count");
    std::string out;
    csv::Row row;
    row.push_back("index");
    row.insert(row.end(), table.fields.begin(), table.fields.end());
    csv::append_row(out, row);
    for (const auto i : mask.indices()) {
        row.clear();
        row.push_back(std::to_string(i));
        for (std::size_t f = 0; f < table.fields.size(); ++f) row.push_back(table.value(i, f));
        csv::append_row(out, row);
    }
    return out;
}

Atlas::Atlas(AtlasDescriptor descriptor, std::vector<Image> pages)
    : descriptor_(descriptor), pages_(std::move(pages)) {
    for (const auto& p : pages_)
        if (p.width != descriptor_.page_px || p.height != descriptor_.page_px)
            throw ValidationError("atlas page size differs from page_px");
}

Atlas Atlas::load(const Bundle& bundle) {
    std::vector<Image> pages;
    for (int k = 0; k < bundle.manifest.atlas.page_count; ++k)
        pages.push_back(read_image(bundle.atlas_page_path(k).string()));
    return Atlas(bundle.manifest.atlas, std::move(pages));
}

const std::uint8_t* Atlas::pixel(std::size_t index, int x, int y) const {
    const auto c = descriptor_.cell(index);
    if (c.page >= static_cast<int>(pages_.size())) throw InvalidArgument("object outside the atlas");
    const int t = descriptor_.thumb_px;
    return pages_[c.page].at(c.col * t + x, c.row * t + y);
}

Image Atlas::thumbnail(std::size_t index) const {
    const int t = descriptor_.thumb_px;
    Image out(t, t);
    for (int y = 0; y < t; ++y)
        for (int x = 0; x < t; ++x) std::copy_n(pixel(index, x, y), 4, out.at(x, y));
    return out;
}

namespace {

double thumb_size_in_view_units(const ViewState& view) {
    return view.thumb_size * std::pow(view.zoom, view.thumb_scale) * 2.0 / kReferenceCanvas;
}

}  // namespace

ScreenPoint to_screen(const ViewState& view, double x, double y) {
    const double half = view.canvas_px / 2.0;
    return {(x - view.center_x) * view.zoom * half + half, half - (y - view.center_y) * view.zoom * half};
}

std::vector<std::size_t> drawn_objects(const ProjectionTable& projection, const SelectionMask& mask,
                                       const ViewState& view) {
    view.validate();
    const std::size_t n = projection.size();
    if (mask.size() != n) throw InvalidArgument("mask length differs from projection size");

    std::vector<double> depth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto z = projection.z(i);
        depth[i] = z ? static_cast<double>(*z) : derived_depth(i, n);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return depth[a] < depth[b]; });

    // Culling happens in view units, where the canvas spans [-1, 1], so the
    // decision does not depend on canvas_px.
    const double half = thumb_size_in_view_units(view) / 2.0;
    std::vector<std::size_t> out;
    for (const auto i : order) {
        if (!mask.test(i) && !view.show_greyed) continue;
        const double u = (projection.x(i) - view.center_x) * view.zoom;
        const double v = (projection.y(i) - view.center_y) * view.zoom;
        if (u + half <= -1.0 || u - half >= 1.0 || v + half <= -1.0 || v - half >= 1.0) continue;
        out.push_back(i);
    }
    return out;
}

Image render_image(const ProjectionTable& projection, const Atlas& atlas, const SelectionMask& mask,
                   const ViewState& view) {
    const auto order = drawn_objects(projection, mask, view);

    Image canvas(view.canvas_px, view.canvas_px);
    for (int y = 0; y < canvas.height; ++y)
        for (int x = 0; x < canvas.width; ++x) {
            auto* p = canvas.at(x, y);
            p[0] = kBackground[0];
            p[1] = kBackground[1];
            p[2] = kBackground[2];
            p[3] = 255;
        }

    const int size = view.draw_size();
    const int thumb = atlas.descriptor().thumb_px;
    const int canvas_px = view.canvas_px;
    for (const auto i : order) {
        const bool pass = mask.test(i);
        const auto s = to_screen(view, projection.x(i), projection.y(i));
        const int left = static_cast<int>(std::floor(s.x - size / 2.0 + 0.5));
        const int top = static_cast<int>(std::floor(s.y - size / 2.0 + 0.5));
        const int x0 = std::max(0, left), x1 = std::min(canvas_px, left + size);
        const int y0 = std::max(0, top), y1 = std::min(canvas_px, top + size);
        for (int py = y0; py < y1; ++py) {
            const int sy = std::min(thumb - 1, static_cast<int>((py - top + 0.5) * thumb / size));
            for (int px = x0; px < x1; ++px) {
                const int sx = std::min(thumb - 1, static_cast<int>((px - left + 0.5) * thumb / size));
                const auto* src = atlas.pixel(i, sx, sy);
                double rgb[3] = {static_cast<double>(src[0]), static_cast<double>(src[1]), static_cast<double>(src[2])};
                double alpha = src[3] / 255.0;
                if (!pass) {
                    const double luma = 0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2];
                    rgb[0] = rgb[1] = rgb[2] = luma;
                    alpha *= kGreyedAlpha;
                }
                if (alpha <= 0.0) continue;
                auto* dst = canvas.at(px, py);
                for (int c = 0; c < 3; ++c)
                    dst[c] = static_cast<std::uint8_t>(
                        std::clamp(std::lround(rgb[c] * alpha + dst[c] * (1.0 - alpha)), 0L, 255L));
            }
        }
    }
    return canvas;
}

std::vector<std::uint8_t> render_png(const ProjectionTable& projection, const Atlas& atlas, const SelectionMask& mask,
                                     const ViewState& view) {
    return encode_png(render_image(projection, atlas, mask, view));
}

}  // namespace csn::exports
