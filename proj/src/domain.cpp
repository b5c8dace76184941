#include "membrane/domain.hpp"

#include "membrane/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace membrane {

namespace {

template <class... F>
struct overloaded : F... {
    using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw PreconditionError(std::string("domain length '") + name + "' must be positive");
}

Shape scale_shape(const Shape& shape, double s) {
    return std::visit(overloaded{
                          [&](const Rectangle& r) -> Shape { return Rectangle{r.width * s, r.height * s}; },
                          [&](const Disk& d) -> Shape { return Disk{d.radius * s}; },
                          [&](const Dumbbell& b) -> Shape {
                              return Dumbbell{b.lobe_radius * s, b.neck_length * s, b.neck_halfwidth * s};
                          }},
                      shape);
}

struct GridFrame {
    double h;
    int nx;
    int ny;
    Point origin;
};

GridFrame frame_for(const Shape& shape, int resolution) {
    const double n = resolution;
    return std::visit(overloaded{
                          [&](const Rectangle& r) {
                              const double h = std::max(r.width, r.height) / n;
                              const int nx = std::max(1, static_cast<int>(std::lround(r.width / h)));
                              const int ny = std::max(1, static_cast<int>(std::lround(r.height / h)));
                              return GridFrame{h, nx, ny, {0.0, 0.0}};
                          },
                          [&](const Disk& d) {
                              const double h = 2.0 * d.radius / n;
                              return GridFrame{h, resolution, resolution, {-d.radius, -d.radius}};
                          },
                          [&](const Dumbbell& b) {
                              const double half = 0.5 * b.neck_length + 2.0 * b.lobe_radius;
                              const double h = 2.0 * half / n;
                              const int ny = std::max(1, static_cast<int>(std::ceil(2.0 * b.lobe_radius / h - 1e-9)));
                              return GridFrame{h, resolution, ny, {-half, -0.5 * ny * h}};
                          }},
                      shape);
}

} // namespace

void DomainSpec::validate() const {
    std::visit(overloaded{[](const Rectangle& r) {
                              require_positive(r.width, "width");
                              require_positive(r.height, "height");
                          },
                          [](const Disk& d) { require_positive(d.radius, "radius"); },
                          [](const Dumbbell& b) {
                              require_positive(b.lobe_radius, "lobe_radius");
                              require_positive(b.neck_length, "neck_length");
                              require_positive(b.neck_halfwidth, "neck_halfwidth");
                          }},
               shape);
    if (resolution < 1)
        throw PreconditionError("domain resolution must be positive");
    if (target_area && !(*target_area > 0.0))
        throw PreconditionError("target_area must be positive");
}

bool shape_contains(const Shape& shape, Point p) {
    return std::visit(overloaded{
                          [&](const Rectangle& r) {
                              return p.x > 0.0 && p.x < r.width && p.y > 0.0 && p.y < r.height;
                          },
                          [&](const Disk& d) { return p.x * p.x + p.y * p.y < d.radius * d.radius; },
                          [&](const Dumbbell& b) {
                              const double cx = 0.5 * b.neck_length + b.lobe_radius;
                              const double r2 = b.lobe_radius * b.lobe_radius;
                              const double dl = (p.x + cx) * (p.x + cx) + p.y * p.y;
                              const double dr = (p.x - cx) * (p.x - cx) + p.y * p.y;
                              const bool neck = std::abs(p.x) <= cx && std::abs(p.y) < b.neck_halfwidth;
                              return dl < r2 || dr < r2 || neck;
                          }},
                      shape);
}

Domain::Domain(double spacing, int nx, int ny, Point origin, std::vector<bool> mask,
               std::optional<Shape> shape)
    : h_(spacing), nx_(nx), ny_(ny), origin_(origin), mask_(std::move(mask)), shape_(std::move(shape)) {
    if (!(h_ > 0.0) || nx_ < 1 || ny_ < 1)
        throw PreconditionError("grid spacing and extents must be positive");
    if (mask_.size() != static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_))
        throw PreconditionError("mask size does not match grid extents");

    grid_to_cell_.assign(mask_.size(), kExterior);
    for (int j = 0; j < ny_; ++j) {
        for (int i = 0; i < nx_; ++i) {
            const std::size_t g = static_cast<std::size_t>(j) * nx_ + i;
            if (!mask_[g])
                continue;
            grid_to_cell_[g] = static_cast<std::ptrdiff_t>(cells_.size());
            cells_.push_back(g);
            centroids_.push_back({origin_.x + (i + 0.5) * h_, origin_.y + (j + 0.5) * h_});
        }
    }
    if (cells_.empty())
        throw PreconditionError("domain has no interior cells");

    neighbours_.resize(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const int i = column(c);
        const int j = row(c);
        neighbours_[c] = {cell_at(i - 1, j), cell_at(i + 1, j), cell_at(i, j - 1), cell_at(i, j + 1)};
    }
}

std::ptrdiff_t Domain::cell_at(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_)
        return kExterior;
    return grid_to_cell_[static_cast<std::size_t>(j) * nx_ + i];
}

int Domain::exterior_neighbour_count(std::size_t c) const {
    const auto& nb = neighbours_[c];
    return static_cast<int>(std::count(nb.begin(), nb.end(), kExterior));
}

Domain Domain::scaled(double factor) const {
    std::optional<Shape> shape;
    if (shape_)
        shape = scale_shape(*shape_, factor);
    return Domain(h_ * factor, nx_, ny_, {origin_.x * factor, origin_.y * factor}, mask_, std::move(shape));
}

DomainPtr build_domain(const DomainSpec& spec) {
    spec.validate();
    const GridFrame f = frame_for(spec.shape, spec.resolution);
    std::vector<bool> mask(static_cast<std::size_t>(f.nx) * static_cast<std::size_t>(f.ny), false);
    for (int j = 0; j < f.ny; ++j)
        for (int i = 0; i < f.nx; ++i)
            mask[static_cast<std::size_t>(j) * f.nx + i] =
                shape_contains(spec.shape, {f.origin.x + (i + 0.5) * f.h, f.origin.y + (j + 0.5) * f.h});

    Domain d(f.h, f.nx, f.ny, f.origin, std::move(mask), spec.shape);
    if (spec.target_area)
        return std::make_shared<const Domain>(d.scaled(std::sqrt(*spec.target_area / d.measure())));
    return std::make_shared<const Domain>(std::move(d));
}

std::vector<std::size_t> boundary_cells(const Domain& d) {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < d.size(); ++c)
        if (d.exterior_neighbour_count(c) > 0)
            out.push_back(c);
    return out;
}

} // namespace membrane
