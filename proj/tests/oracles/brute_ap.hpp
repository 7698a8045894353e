#pragma once

// Brute-force retrieval metrics written directly from the definitions:
// for each positive, locate it in the junk-free list and count the
// positives ahead of it.

#include <algorithm>
#include <optional>
#include <utility>
#include <set>
#include <string>
#include <vector>

namespace glam::oracle {

inline std::vector<std::string> without_junk(const std::vector<std::string>& ranking,
                                             const std::set<std::string>& junk) {
  std::vector<std::string> out;
  for (const auto& id : ranking)
    if (!junk.count(id)) out.push_back(id);
  return out;
}

inline std::optional<double> brute_ap(const std::vector<std::string>& ranking, const std::set<std::string>& pos,
                                      const std::set<std::string>& junk) {
  std::set<std::string> live;
  for (const auto& p : pos)
    if (!junk.count(p)) live.insert(p);
  if (live.empty()) return std::nullopt;
  const auto list = without_junk(ranking, junk);
  std::vector<std::pair<double, double>> terms;  // (rank, contribution)
  for (const auto& p : live) {
    const auto it = std::find(list.begin(), list.end(), p);
    if (it == list.end()) continue;
    const double r = static_cast<double>(it - list.begin());
    double j = 0.0;
    for (auto k = list.begin(); k != it; ++k) j += live.count(*k) ? 1.0 : 0.0;
    const double before = r > 0 ? j / r : 1.0;
    const double after = (j + 1.0) / (r + 1.0);
    terms.emplace_back(r, (before + after) / 2.0);
  }
  // Summed in rank order so the result is comparable bit for bit.
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (const auto& t : terms) total += t.second;
  return total / static_cast<double>(live.size());
}

inline std::optional<double> brute_p10(const std::vector<std::string>& ranking, const std::set<std::string>& pos,
                                       const std::set<std::string>& junk) {
  std::size_t live = 0;
  for (const auto& p : pos) live += junk.count(p) ? 0 : 1;
  if (live == 0) return std::nullopt;
  const auto list = without_junk(ranking, junk);
  int hits = 0;
  for (std::size_t i = 0; i < list.size() && i < 10; ++i) hits += pos.count(list[i]) ? 1 : 0;
  return hits / 10.0;
}

}  // namespace glam::oracle
