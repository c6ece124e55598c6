// SPDX-License-Identifier: Apache-2.0
#include "mottsim/io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mott {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    for (const auto& [k, v] : cfg.items_)
      if (k == key)
        throw ConfigError("config line " + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
    cfg.items_.emplace_back(key, value);
    cfg.lines_.push_back(lineno);
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  return parse(read_text_file(path));
}

std::string KeyValueConfig::serialize() const {
  std::vector<std::pair<std::string, std::string>> sorted(items_);
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (const auto& [k, v] : sorted) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

bool KeyValueConfig::has(const std::string& key) const {
  for (const auto& [k, v] : items_)
    if (k == key) return true;
  return false;
}

int KeyValueConfig::line_of(const std::string& key) const {
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (items_[i].first == key) return lines_.empty() ? 0 : lines_[i];
  return 0;
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  for (const auto& [k, v] : items_)
    if (k == key) return v;
  throw ConfigError("config: missing required key '" + key + "'");
}

std::string KeyValueConfig::get_or(const std::string& key,
                                   const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing text");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config line " + std::to_string(line_of(key)) + ": key '" +
                      key + "' is not a number: '" + v + "'");
  }
}

double KeyValueConfig::get_double_or(const std::string& key,
                                     double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key) const {
  const double v = get_double(key);
  const auto r = static_cast<std::int64_t>(v);
  if (static_cast<double>(r) != v)
    throw ConfigError("config line " + std::to_string(line_of(key)) + ": key '" +
                      key + "' must be an integer");
  return r;
}

std::int64_t KeyValueConfig::get_int_or(const std::string& key,
                                        std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::vector<double> KeyValueConfig::get_list(const std::string& key) const {
  const std::string& v = get(key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(line_of(key)) +
                        ": key '" + key + "' has a bad list entry '" + item + "'");
    }
  }
  if (out.empty())
    throw ConfigError("config line " + std::to_string(line_of(key)) + ": key '" +
                      key + "' must hold a comma-separated list");
  return out;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : items_)
    if (k == key) {
      v = value;
      return;
    }
  items_.emplace_back(key, value);
  lines_.push_back(0);
}

void KeyValueConfig::set_double(const std::string& key, double value) {
  set(key, format_double(value));
}

void KeyValueConfig::set_int(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

bool KeyValueConfig::operator==(const KeyValueConfig& other) const {
  auto a = items_;
  auto b = other.items_;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& schema,
                     std::uint64_t seed, const KeyValueConfig& echo,
                     const std::vector<std::string>& columns)
    : path_(path), columns_(columns.size()) {
  buffer_ = "# mottsim-csv v1 schema=" + schema + " seed=" + std::to_string(seed);
  auto sorted = echo.items();
  std::sort(sorted.begin(), sorted.end());
  for (const auto& [k, v] : sorted) {
    std::string vv = v;
    std::replace(vv.begin(), vv.end(), ' ', '_');
    buffer_ += " " + k + "=" + vv;
  }
  buffer_ += '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    buffer_ += columns[i];
    buffer_ += i + 1 < columns.size() ? ',' : '\n';
  }
}

CsvWriter::~CsvWriter() {
  try {
    write_text_file(path_, buffer_);
  } catch (...) {
    // destructor must not throw; the file is simply not written
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw std::invalid_argument("CsvWriter: column count mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    buffer_ += cells[i];
    buffer_ += i + 1 < cells.size() ? ',' : '\n';
  }
}

void CsvWriter::row_values(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row(cells);
}

void export_configuration(const MarkedConfiguration& cfg,
                          const std::string& path, std::uint64_t seed) {
  const std::size_t d = cfg.box().sides.size();
  std::string out = "# mottsim-points v1 d=" + std::to_string(d) + " L=";
  for (std::size_t k = 0; k < d; ++k)
    out += (k ? ";" : "") + format_double(cfg.box().sides[k]);
  out += std::string(" boundary=") +
         (cfg.box().periodic() ? "periodic" : "open") +
         " seed=" + std::to_string(seed);
  if (cfg.has_origin())
    out += " origin=" + std::to_string(*cfg.origin_index());
  out += '\n';
  for (std::size_t k = 0; k < d; ++k) out += "x_" + std::to_string(k + 1) + " ";
  out += "E\n";
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k)
      out += format_double(cfg.coord(i, k)) + " ";
    out += format_double(cfg.energy(i)) + "\n";
  }
  write_text_file(path, out);
}

MarkedConfiguration import_configuration(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string header;
  if (!std::getline(in, header) || header.rfind("# mottsim-points v1", 0) != 0)
    throw ConfigError(path + ": not a mottsim point table");
  const auto field = [&](const std::string& name) {
    const auto pos = header.find(" " + name + "=");
    if (pos == std::string::npos)
      throw ConfigError(path + ": header missing " + name);
    const auto start = pos + name.size() + 2;
    const auto end = header.find(' ', start);
    return header.substr(start, end == std::string::npos ? end : end - start);
  };
  const int d = std::stoi(field("d"));
  std::vector<double> sides;
  {
    std::stringstream ss(field("L"));
    std::string item;
    while (std::getline(ss, item, ';')) sides.push_back(std::stod(item));
  }
  if (static_cast<int>(sides.size()) == 1 && d > 1)
    sides.assign(static_cast<std::size_t>(d), sides[0]);
  BoxGeometry box;
  box.sides = sides;
  box.boundary =
      field("boundary") == "periodic" ? Boundary::periodic : Boundary::open;
  std::optional<std::size_t> origin;
  if (header.find(" origin=") != std::string::npos)
    origin = static_cast<std::size_t>(std::stoul(field("origin")));
  std::string column_row;
  std::getline(in, column_row);  // column names
  std::vector<double> coords, energies;
  std::string line;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    double v;
    std::vector<double> row;
    while (ss >> v) row.push_back(v);
    if (row.size() != static_cast<std::size_t>(d) + 1)
      throw ConfigError(path + " line " + std::to_string(lineno) +
                        ": expected d+1 columns");
    coords.insert(coords.end(), row.begin(), row.end() - 1);
    energies.push_back(row.back());
  }
  return MarkedConfiguration::create(box, std::move(coords), std::move(energies),
                                     origin);
}

void write_index_list(std::span<const std::uint32_t> indices,
                      const std::string& path) {
  std::string out;
  for (auto i : indices) {
    out += std::to_string(i);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mott
