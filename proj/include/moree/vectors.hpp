#pragma once

// Dense embedding tables in the common "word v1 ... vD" text format.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "moree/common.hpp"

namespace moree {

/// u.v / (|u| |v|). Throws on a dimension mismatch or an all-zero vector.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw UsageError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()) + ")");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw UsageError("cosine: zero vector");
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

class WordVectors {
 public:
  WordVectors() = default;
  explicit WordVectors(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw UsageError("WordVectors: dim must be positive");
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  bool empty() const { return table_.empty(); }

  void add(const std::string& key, std::vector<double> v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0)
      throw DataError("vector for '" + key + "' has dim " + std::to_string(v.size()) +
                      ", expected " + std::to_string(dim_));
    for (double x : v)
      if (!std::isfinite(x)) throw DataError("vector for '" + key + "' has a non-finite component");
    table_[key] = std::move(v);
  }

  const std::vector<double>* find(const std::string& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }

  bool contains(const std::string& key) const { return table_.count(key) != 0; }

  /// Parses the whitespace-separated text format. A first line of exactly two
  /// integers is treated as a "count dim" header.
  static WordVectors load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vector file: " + path);
    WordVectors wv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::istringstream ss(line);
      std::vector<std::string> fields;
      for (std::string f; ss >> f;) fields.push_back(std::move(f));
      if (fields.empty()) continue;
      if (lineno == 1 && fields.size() == 2 && is_uint(fields[0]) && is_uint(fields[1])) {
        wv.dim_ = std::stoul(fields[1]);
        continue;
      }
      if (fields.size() < 2) throw DataError(path + ":" + std::to_string(lineno) + ": no components");
      std::vector<double> v;
      v.reserve(fields.size() - 1);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        try {
          std::size_t used = 0;
          v.push_back(std::stod(fields[i], &used));
          if (used != fields[i].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + fields[i] + "'");
        }
      }
      try {
        wv.add(fields[0], std::move(v));
      } catch (const DataError& e) {
        throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return wv;
  }

 private:
  static bool is_uint(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  }

  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

/// Mean of the vectors of the tokens that have one; empty if none do.
template <class Range>
std::vector<double> mean_vector(const WordVectors& wv, const Range& tokens) {
  std::vector<double> acc;
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    const auto* v = wv.find(t);
    if (!v) continue;
    if (acc.empty()) acc.assign(v->size(), 0.0);
    for (std::size_t i = 0; i < v->size(); ++i) acc[i] += (*v)[i];
    ++hits;
  }
  for (double& x : acc) x /= static_cast<double>(hits);
  return acc;
}

}  // namespace moree
