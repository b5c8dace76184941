#pragma once

#include "membrane/fields.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace membrane::io {

/// Header `x,y,value`, one row per interior cell in domain order, %.17g.
void write_field_csv(const ScalarField& field, const std::filesystem::path& path);
/// Reads a field written by write_field_csv; every row must sit on the
/// matching cell centroid.
ScalarField read_field_csv(DomainPtr domain, const std::filesystem::path& path);

struct ImageScale {
    double min = 0.0;  // value mapped to 0
    double max = 0.0;  // value mapped to 65535
};

/// P2 image over the full grid, top row = largest y. Interior cells are scaled
/// linearly from [min, max] to [0, 65535]; exterior pixels are 0.
ImageScale write_field_pgm(const ScalarField& field, const std::filesystem::path& path);
/// P2 image with values in {0, 1}: 1 on the set, 0 elsewhere.
void write_mask_pgm(const CellSet& set, const std::filesystem::path& path);
CellSet read_mask_pgm(DomainPtr domain, const std::filesystem::path& path);

/// Writes text verbatim (binary mode, no newline translation).
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

} // namespace membrane::io
