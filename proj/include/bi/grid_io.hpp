#pragma once

#include "bi/fields.hpp"

#include <iosfwd>
#include <string>

namespace bi {

inline constexpr unsigned kGridFormatVersion = 1;

/// Binary layout: "BIGF", u32 version, u32 dim, u32 points, f64 extent,
/// then node values as row-major f64. Little-endian host order.
void write_binary(std::ostream& out, const GridField& field);
GridField read_binary(std::istream& in);

void save_binary(const std::string& path, const GridField& field);
GridField load_binary(const std::string& path);

/// JSON with the same header fields and a flat "values" array. Doubles are
/// printed with 17 significant digits so parsing returns identical bits.
std::string to_json(const GridField& field);
GridField from_json(const std::string& text);

} // namespace bi
