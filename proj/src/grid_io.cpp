#include "bi/grid_io.hpp"

#include "bi/error.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace bi {

namespace {

constexpr std::array<char, 4> kMagic = {'B', 'I', 'G', 'F'};

template <class T>
void put(std::ostream& out, T value)
{
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in)
{
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw InvalidArgument("fields", "truncated grid file");
  }
  return value;
}

} // namespace

void write_binary(std::ostream& out, const GridField& field)
{
  const BoxGrid& g = field.grid();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kGridFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.points()));
  put<double>(out, g.extent());
  auto v = field.values();
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

GridField read_binary(std::istream& in)
{
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw InvalidArgument("fields", "not a grid field file");
  }
  auto version = get<std::uint32_t>(in);
  if (version != kGridFormatVersion) {
    throw InvalidArgument("fields", "unsupported grid format version " + std::to_string(version));
  }
  auto dim = get<std::uint32_t>(in);
  auto points = get<std::uint32_t>(in);
  auto extent = get<double>(in);
  if (dim > 16 || points > 100000) {
    throw InvalidArgument("fields", "implausible grid header");
  }
  BoxGrid grid(static_cast<int>(dim), extent, static_cast<int>(points));
  std::vector<double> values(grid.node_count());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) {
    throw InvalidArgument("fields", "truncated grid file");
  }
  return GridField(grid, std::move(values));
}

void save_binary(const std::string& path, const GridField& field)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InvalidArgument("fields", "cannot open " + path + " for writing");
  }
  write_binary(out, field);
}

GridField load_binary(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidArgument("fields", "cannot open " + path);
  }
  return read_binary(in);
}

std::string to_json(const GridField& field)
{
  const BoxGrid& g = field.grid();
  nlohmann::json j;
  j["format"] = "bi-grid-field";
  j["version"] = kGridFormatVersion;
  j["dim"] = g.dim();
  j["points_per_axis"] = g.points();
  j["extent"] = g.extent();
  auto v = field.values();
  j["values"] = std::vector<double>(v.begin(), v.end());
  return j.dump();
}

GridField from_json(const std::string& text)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    if (j.at("version").get<unsigned>() != kGridFormatVersion) {
      throw InvalidArgument("fields", "unsupported grid format version");
    }
    BoxGrid grid(j.at("dim").get<int>(), j.at("extent").get<double>(), j.at("points_per_axis").get<int>());
    return GridField(grid, j.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("fields", std::string("malformed grid JSON: ") + e.what());
  }
}

} // namespace bi
