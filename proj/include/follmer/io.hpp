// Copyright 2026 The Follmer Flow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Mixture JSON files and sample / trajectory CSV output.
//
// Mixture JSON: {"dim": d, "weights": [...], "means": [[...], ...],
//                "covariances": [[[...], ...], ...]}

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "follmer/densities.hpp"
#include "follmer/flow.hpp"
#include "follmer/sample_batch.hpp"

namespace follmer {

using nlohmann::json;

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline json mixture_to_json(const GaussianMixture& gm) {
  json j;
  j["dim"] = gm.dim();
  j["weights"] = gm.weights();
  json means = json::array(), covs = json::array();
  for (const Gaussian& c : gm.components()) {
    means.push_back(std::vector<double>(c.mean().data(), c.mean().data() + c.mean().size()));
    json cov = json::array();
    for (Eigen::Index r = 0; r < c.dim(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(c.dim()));
      for (Eigen::Index k = 0; k < c.dim(); ++k) row[static_cast<std::size_t>(k)] = c.covariance()(r, k);
      cov.push_back(row);
    }
    covs.push_back(cov);
  }
  j["means"] = means;
  j["covariances"] = covs;
  return j;
}

/// Parses and validates a mixture. Weights within 1e-12 of summing to one
/// are kept verbatim; other nonnegative weights are rescaled.
inline GaussianMixture mixture_from_json(const json& j) {
  try {
    const auto d = j.at("dim").get<Eigen::Index>();
    if (d < 1) throw std::invalid_argument("dim must be positive");
    const auto weights = j.at("weights").get<std::vector<double>>();
    const auto& means = j.at("means");
    const auto& covs = j.at("covariances");
    if (means.size() != weights.size() || covs.size() != weights.size())
      throw std::invalid_argument("weights, means and covariances differ in length");
    std::vector<Gaussian> comps;
    comps.reserve(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const auto mean = means[i].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(mean.size()) != d)
        throw std::invalid_argument("mean " + std::to_string(i) + " has wrong length");
      if (covs[i].size() != static_cast<std::size_t>(d))
        throw std::invalid_argument("covariance " + std::to_string(i) + " has wrong shape");
      Matrix cov(d, d);
      for (Eigen::Index r = 0; r < d; ++r) {
        const auto row = covs[i][static_cast<std::size_t>(r)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != d)
          throw std::invalid_argument("covariance " + std::to_string(i) + " has wrong shape");
        for (Eigen::Index k = 0; k < d; ++k) cov(r, k) = row[static_cast<std::size_t>(k)];
      }
      comps.emplace_back(Eigen::Map<const Vector>(mean.data(), d), std::move(cov));
    }
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (std::abs(sum - 1.0) <= 1e-12) return GaussianMixture(weights, std::move(comps));
    return GaussianMixture::normalized(weights, std::move(comps));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("mixture JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("mixture JSON: ") + e.what());
  }
}

inline GaussianMixture load_mixture_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mixture file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("mixture file " + path.string() + ": " + e.what());
  }
  try {
    return mixture_from_json(j);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() +
                                     ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

inline void save_mixture_file(const std::filesystem::path& path, const GaussianMixture& gm) {
  auto out = detail::open_output(path);
  out << mixture_to_json(gm).dump(2) << '\n';
  detail::finish_output(out, path);
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
  detail::finish_output(out, path);
}

/// Header x1..xd, then one row per sample.
inline void write_samples_csv(const std::filesystem::path& path, const SampleBatch& batch) {
  auto out = detail::open_output(path);
  for (Eigen::Index k = 0; k < batch.dim(); ++k) out << (k ? "," : "") << 'x' << (k + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    for (Eigen::Index k = 0; k < batch.dim(); ++k)
      out << (k ? "," : "") << format_double(batch.data(i, k));
    out << '\n';
  }
  detail::finish_output(out, path);
}

/// particle_id,t,x1..xd; one row per particle per grid node.
inline void write_trajectories_csv(const std::filesystem::path& path,
                                   const std::vector<Trajectory>& paths,
                                   const std::vector<double>& times) {
  auto out = detail::open_output(path);
  const Eigen::Index d = paths.empty() || paths.front().empty() ? 0 : paths.front().front().size();
  out << "particle_id,t";
  for (Eigen::Index k = 0; k < d; ++k) out << ",x" << (k + 1);
  out << '\n';
  for (std::size_t p = 0; p < paths.size(); ++p) {
    for (std::size_t s = 0; s < paths[p].size(); ++s) {
      out << p << ',' << format_double(times.at(s));
      for (Eigen::Index k = 0; k < d; ++k) out << ',' << format_double(paths[p][s](k));
      out << '\n';
    }
  }
  detail::finish_output(out, path);
}

/// Reads a samples CSV written by write_samples_csv.
inline Matrix read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty file");
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    Eigen::Index k = 0;
    while (p < end) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc())
        throw std::invalid_argument(path.string() + ": bad number on row " + std::to_string(rows + 1));
      values.push_back(v);
      ++k;
      p = res.ptr;
      if (p < end && *p == ',') ++p;
    }
    if (k != cols)
      throw std::invalid_argument(path.string() + ": row " + std::to_string(rows + 1) +
                                  " has the wrong number of columns");
    ++rows;
  }
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) out(i, k) = values[static_cast<std::size_t>(i * cols + k)];
  return out;
}

}  // namespace follmer
