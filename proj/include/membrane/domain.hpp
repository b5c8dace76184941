#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace membrane {

struct Rectangle {
    double width = 1.0;
    double height = 1.0;
};

struct Disk {
    double radius = 1.0;
};

/// Two disks joined by an axis-aligned bar along the x axis.
struct Dumbbell {
    double lobe_radius = 1.0;
    double neck_length = 1.0;    // gap between the two lobes
    double neck_halfwidth = 0.3;
};

using Shape = std::variant<Rectangle, Disk, Dumbbell>;

struct DomainSpec {
    Shape shape = Rectangle{};
    int resolution = 32;  // cells along the longest bounding-box axis
    /// When set, every length is scaled so that the discrete measure equals
    /// this value exactly (cell counts are scale invariant at fixed resolution).
    std::optional<double> target_area;

    void validate() const;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Masked uniform grid. Interior cells are numbered row-major (y outer, x inner);
/// neighbours outside the mask act as zero-valued Dirichlet ghosts.
class Domain {
public:
    static constexpr std::ptrdiff_t kExterior = -1;

    Domain(double spacing, int nx, int ny, Point origin, std::vector<bool> mask,
           std::optional<Shape> shape = std::nullopt);

    double spacing() const noexcept { return h_; }
    double cell_measure() const noexcept { return h_ * h_; }
    double measure() const noexcept { return static_cast<double>(cells_.size()) * cell_measure(); }

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    Point origin() const noexcept { return origin_; }
    std::size_t size() const noexcept { return cells_.size(); }

    /// Grid-flat index (j * nx + i) of interior cell `c`.
    std::size_t grid_index(std::size_t c) const { return cells_[c]; }
    int column(std::size_t c) const { return static_cast<int>(cells_[c] % nx_); }
    int row(std::size_t c) const { return static_cast<int>(cells_[c] / nx_); }
    Point centroid(std::size_t c) const { return centroids_[c]; }
    const std::vector<Point>& centroids() const noexcept { return centroids_; }

    /// Interior cell at grid position (i, j), or kExterior.
    std::ptrdiff_t cell_at(int i, int j) const;
    bool inside_mask(int i, int j) const { return cell_at(i, j) != kExterior; }

    /// West, east, south, north neighbours; kExterior marks a ghost.
    const std::array<std::ptrdiff_t, 4>& neighbours(std::size_t c) const { return neighbours_[c]; }
    int exterior_neighbour_count(std::size_t c) const;

    /// Analytic shape the mask was sampled from (lengths as built), if any.
    const std::optional<Shape>& shape() const noexcept { return shape_; }
    bool is_disk() const noexcept { return shape_ && std::holds_alternative<Disk>(*shape_); }

    /// Fresh copy with every length multiplied by `factor`; the mask is unchanged.
    Domain scaled(double factor) const;

private:
    double h_;
    int nx_;
    int ny_;
    Point origin_;
    std::vector<bool> mask_;
    std::optional<Shape> shape_;
    std::vector<std::ptrdiff_t> grid_to_cell_;
    std::vector<std::size_t> cells_;
    std::vector<Point> centroids_;
    std::vector<std::array<std::ptrdiff_t, 4>> neighbours_;
};

using DomainPtr = std::shared_ptr<const Domain>;

DomainPtr build_domain(const DomainSpec& spec);

inline double domain_measure(const Domain& d) { return d.measure(); }

/// Interior cells with at least one exterior 4-neighbour, ascending.
std::vector<std::size_t> boundary_cells(const Domain& d);

/// Geometric test used for masking; lengths already scaled.
bool shape_contains(const Shape& shape, Point p);

} // namespace membrane
