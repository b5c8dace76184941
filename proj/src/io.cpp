#include "membrane/io.hpp"

#include "membrane/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace membrane::io {

namespace {

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(std::string_view token, const std::filesystem::path& path) {
    // strtod accepts the %.17g forms, including exponents
    std::string s(token);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw ConfigError(path.string() + ": malformed number '" + s + "'");
    return v;
}

// Grid pixel (i, j) of image row `line` (0 at the top).
int grid_row(const Domain& d, int line) { return d.ny() - 1 - line; }

std::vector<long> read_pgm(const std::filesystem::path& path, int& width, int& height, long& maxval) {
    std::istringstream in(read_text(path));
    std::string magic;
    in >> magic;
    if (magic != "P2")
        throw ConfigError(path.string() + ": expected a P2 image");
    // skip comments between header tokens
    auto next = [&]() -> long {
        std::string tok;
        while (in >> tok) {
            if (tok.front() == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            long v = 0;
            const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || p != tok.data() + tok.size())
                throw ConfigError(path.string() + ": malformed image token '" + tok + "'");
            return v;
        }
        throw ConfigError(path.string() + ": truncated image");
    };
    width = static_cast<int>(next());
    height = static_cast<int>(next());
    maxval = next();
    if (width <= 0 || height <= 0 || maxval <= 0)
        throw ConfigError(path.string() + ": bad image header");
    std::vector<long> px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (auto& p : px)
        p = next();
    return px;
}

} // namespace

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
        throw ConfigError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_field_csv(const ScalarField& field, const std::filesystem::path& path) {
    const Domain& d = field.domain();
    std::string out = "x,y,value\n";
    out.reserve(out.size() + field.size() * 64);
    for (std::size_t c = 0; c < field.size(); ++c) {
        const Point p = d.centroid(c);
        out += format_g17(p.x);
        out += ',';
        out += format_g17(p.y);
        out += ',';
        out += format_g17(field[c]);
        out += '\n';
    }
    write_text(path, out);
}

ScalarField read_field_csv(DomainPtr domain, const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("x,y,value", 0) != 0)
        throw ConfigError(path.string() + ": missing 'x,y,value' header");
    const double tol = 1e-6 * domain->spacing();
    std::vector<double> values;
    values.reserve(domain->size());
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto a = line.find(',');
        const auto b = a == std::string::npos ? a : line.find(',', a + 1);
        if (b == std::string::npos)
            throw ConfigError(path.string() + ": expected three columns in '" + line + "'");
        const std::size_t c = values.size();
        if (c >= domain->size())
            throw ConfigError(path.string() + ": more rows than interior cells");
        const std::string_view sv(line);
        const double x = parse_double(sv.substr(0, a), path);
        const double y = parse_double(sv.substr(a + 1, b - a - 1), path);
        const Point p = domain->centroid(c);
        if (std::abs(x - p.x) > tol || std::abs(y - p.y) > tol)
            throw ConfigError(path.string() + ": row " + std::to_string(c + 1) + " is not at cell centroid");
        values.push_back(parse_double(sv.substr(b + 1), path));
    }
    if (values.size() != domain->size())
        throw ConfigError(path.string() + ": " + std::to_string(values.size()) + " rows for " +
                          std::to_string(domain->size()) + " cells");
    return ScalarField(std::move(domain), std::move(values));
}

ImageScale write_field_pgm(const ScalarField& field, const std::filesystem::path& path) {
    const Domain& d = field.domain();
    const ImageScale scale{field.min(), field.max()};
    const double span = scale.max - scale.min;
    std::string out = "P2\n" + std::to_string(d.nx()) + " " + std::to_string(d.ny()) + "\n65535\n";
    for (int line = 0; line < d.ny(); ++line) {
        const int j = grid_row(d, line);
        for (int i = 0; i < d.nx(); ++i) {
            long px = 0;
            const auto c = d.cell_at(i, j);
            if (c != Domain::kExterior && span > 0.0)
                px = std::lround((field[static_cast<std::size_t>(c)] - scale.min) / span * 65535.0);
            if (i > 0)
                out += ' ';
            out += std::to_string(px);
        }
        out += '\n';
    }
    write_text(path, out);
    return scale;
}

void write_mask_pgm(const CellSet& set, const std::filesystem::path& path) {
    const Domain& d = *set.domain;
    std::vector<char> on(d.size(), 0);
    for (std::size_t c : set.cells)
        on[c] = 1;
    std::string out = "P2\n" + std::to_string(d.nx()) + " " + std::to_string(d.ny()) + "\n1\n";
    for (int line = 0; line < d.ny(); ++line) {
        const int j = grid_row(d, line);
        for (int i = 0; i < d.nx(); ++i) {
            const auto c = d.cell_at(i, j);
            if (i > 0)
                out += ' ';
            out += (c != Domain::kExterior && on[static_cast<std::size_t>(c)]) ? '1' : '0';
        }
        out += '\n';
    }
    write_text(path, out);
}

CellSet read_mask_pgm(DomainPtr domain, const std::filesystem::path& path) {
    int width = 0, height = 0;
    long maxval = 0;
    const auto px = read_pgm(path, width, height, maxval);
    if (width != domain->nx() || height != domain->ny())
        throw ConfigError(path.string() + ": image size does not match the domain grid");
    CellSet set{domain, {}};
    for (int line = 0; line < height; ++line) {
        const int j = grid_row(*domain, line);
        for (int i = 0; i < width; ++i) {
            const long v = px[static_cast<std::size_t>(line) * static_cast<std::size_t>(width) + static_cast<std::size_t>(i)];
            if (v != 0 && v != 1)
                throw ConfigError(path.string() + ": mask values must be 0 or 1");
            if (v == 0)
                continue;
            const auto c = domain->cell_at(i, j);
            if (c == Domain::kExterior)
                throw ConfigError(path.string() + ": mask marks an exterior pixel");
            set.cells.push_back(static_cast<std::size_t>(c));
        }
    }
    std::sort(set.cells.begin(), set.cells.end());
    return set;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

} // namespace membrane::io
