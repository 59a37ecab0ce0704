// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Candidate selection: the pair (image, caption) whose caption embedding is
// closest, by cosine similarity, to the embedding of the query sentence built
// from the accepted keywords.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"

namespace mugcat::selection {

/// Lowercased keywords joined by single spaces, in acceptance order.
inline std::string build_query(const KeywordSequence& keywords) {
  detail::require(!keywords.empty(), ErrorCode::kEmptyKeywords, "no keywords accepted");
  std::string q;
  for (const auto& k : keywords.keywords()) {
    if (!q.empty()) q.push_back(' ');
    for (char c : k) q.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return q;
}

/// ⟨u,v⟩ / (‖u‖·‖v‖), clamped to [-1, 1].
inline double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimMismatch, "dims " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  for (double x : u) uu += x * x;
  for (double x : v) vv += x * x;
  if (uu == 0.0 || vv == 0.0) throw Error(ErrorCode::kZeroVector, "cosine of a zero vector is undefined");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

inline double cosine(const Embedding& u, const Embedding& v) { return cosine(u.vector(), v.vector()); }

/// Scores every candidate against the query; ties go to the lowest index.
/// `candidates` receive their scores in place.
inline SelectionResult select(std::vector<CandidatePair>& candidates, const Embedding& query_embedding) {
  detail::require(!candidates.empty(), ErrorCode::kInvalidValue, "select needs at least one candidate");
  std::vector<double> scores;
  scores.reserve(candidates.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double s = 0;
    try {
      s = cosine(candidates[i].caption_embedding, query_embedding);
    } catch (const Error& e) {
      throw Error(e.code(), "candidate " + std::to_string(i) + ": " + e.message());
    }
    candidates[i].score = s;
    scores.push_back(s);
    if (s > scores[best]) best = i;
  }
  return SelectionResult(best, candidates[best].image.image_id(), candidates[best].caption.text(), std::move(scores));
}

}  // namespace mugcat::selection
