// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "mottsim/configuration.hpp"

namespace mott {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key = value configuration text ('#' comments, blank lines ignored).
/// Parsing keeps line numbers for precise error messages; serialization is
/// canonical (sorted keys), so parse -> serialize -> parse is the identity.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig parse_file(const std::string& path);

  std::string serialize() const;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  /// comma-separated list of doubles
  std::vector<double> get_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, std::int64_t value);

  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }
  bool operator==(const KeyValueConfig& other) const;

 private:
  int line_of(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> items_;
  std::vector<int> lines_;
};

/// deterministic shortest-round-trip style formatting used in every file we
/// emit (%.17g keeps doubles bit-faithful)
std::string format_double(double v);

/// CSV with a one-line echo header:
///   # mottsim-csv v1 schema=<name> seed=<seed> <key>=<value> ...
/// followed by the column-name row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema,
            std::uint64_t seed, const KeyValueConfig& echo,
            const std::vector<std::string>& columns);
  ~CsvWriter();

  void row(const std::vector<std::string>& cells);
  void row_values(const std::vector<double>& values);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::size_t columns_ = 0;
  std::string buffer_;
};

/// Flat text table of a configuration: header line carrying d, L, boundary
/// and seed, then one row per point, columns x_1..x_d E.
void export_configuration(const MarkedConfiguration& cfg,
                          const std::string& path, std::uint64_t seed);
MarkedConfiguration import_configuration(const std::string& path);

/// Point-index list, one index per line (cluster dumps).
void write_index_list(std::span<const std::uint32_t> indices,
                      const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mott
