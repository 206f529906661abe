#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csn/bitmask.hpp"
#include "csn/bundle.hpp"
#include "csn/image.hpp"

namespace csn::exports {

/// Camera and styling for a rendered projection view.
///
inline constexpr double kReferenceCanvas = 512.0;

/// Thumbnails are drawn as squares of side
///   round(thumb_size * zoom^thumb_scale * canvas_px / 512)
/// pixels (at least 1): thumb_size is the size fully zoomed out on a 512 px
/// canvas, thumb_scale controls how much they grow as the camera zooms in.
/// A larger canvas renders the same view at a higher resolution.
struct ViewState {
    std::string projection;
    double center_x = 0.0;
    double center_y = 0.0;
    double zoom = 1.0;
    int canvas_px = 512;
    double thumb_size = 16.0;
    double thumb_scale = 0.5;
    bool show_greyed = true;

    double draw_extent() const;
    int draw_size() const;
    /// Throws InvalidArgument unless zoom > 0, canvas_px >= 64 and sizes are sane.
    void validate() const;
};

inline constexpr std::uint8_t kBackground[3] = {24, 24, 24};
inline constexpr double kGreyedAlpha = 0.4;

/// RFC-4180 CSV: leading `index` column, then the metadata fields in order;
/// one row per selected object in ascending index order.
std::string export_csv(const MetadataTable& table, const SelectionMask& mask);

/// Atlas pages decoded into memory.
class Atlas {
public:
    Atlas() = default;
    Atlas(AtlasDescriptor descriptor, std::vector<Image> pages);
    static Atlas load(const Bundle& bundle);

    const AtlasDescriptor& descriptor() const { return descriptor_; }
    /// RGBA of pixel (x, y) inside object `index`'s thumbnail.
    const std::uint8_t* pixel(std::size_t index, int x, int y) const;
    Image thumbnail(std::size_t index) const;

private:
    AtlasDescriptor descriptor_;
    std::vector<Image> pages_;
};

/// Screen position of a normalized coordinate:
///   px = (x - cx) * zoom * canvas/2 + canvas/2, py likewise with y inverted.
struct ScreenPoint {
    double x;
    double y;
};
ScreenPoint to_screen(const ViewState& view, double x, double y);

/// Objects the view draws, in painter's order: ascending depth (z, or the
/// derived depth when the projection is 2D), ties by index. Objects whose
/// thumbnail square misses the canvas are culled, as are mask-false objects
/// unless show_greyed.
std::vector<std::size_t> drawn_objects(const ProjectionTable& projection, const SelectionMask& mask,
                                       const ViewState& view);

/// Rasterizes drawn_objects in order. Objects failing the mask are drawn as
/// luma grey at 40% opacity.
Image render_image(const ProjectionTable& projection, const Atlas& atlas, const SelectionMask& mask,
                   const ViewState& view);

std::vector<std::uint8_t> render_png(const ProjectionTable& projection, const Atlas& atlas, const SelectionMask& mask,
                                     const ViewState& view);

}  // namespace csn::exports
