#include "glam/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "glam/errors.hpp"
#include "json.hpp"

namespace glam {

RankedList rank(const Descriptor& query, std::span<const Descriptor> db) {
  const std::size_t d = query.vec.size();
  std::vector<double> scores(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db[i].vec.size() != d) {
      throw ShapeError("rank: descriptor '" + db[i].id + "' has dimension " +
                       std::to_string(db[i].vec.size()) + ", query has " + std::to_string(d));
    }
    // Fixed summation order, so rankings do not depend on the active kernel set.
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += query.vec[k] * db[i].vec[k];
    scores[i] = s;
  }
  std::vector<std::size_t> order(db.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return db[a].id < db[b].id;
  });
  RankedList out{query.id, {}};
  out.ids.reserve(order.size());
  for (std::size_t i : order) out.ids.push_back(db[i].id);
  return out;
}

namespace {

std::size_t effective_positives(const IdSet& positives, const IdSet& junk) {
  std::size_t n = 0;
  for (const std::string& id : positives) n += junk.count(id) == 0;
  return n;
}

}  // namespace

std::optional<double> average_precision(std::span<const std::string> ranking, const IdSet& positives,
                                        const IdSet& junk) {
  const std::size_t npos = effective_positives(positives, junk);
  if (npos == 0) return std::nullopt;
  double ap = 0.0;
  std::size_t r = 0, j = 0;
  for (const std::string& id : ranking) {
    if (junk.count(id)) continue;
    if (positives.count(id)) {
      const double prec0 = r > 0 ? static_cast<double>(j) / static_cast<double>(r) : 1.0;
      const double prec1 = static_cast<double>(j + 1) / static_cast<double>(r + 1);
      ap += 0.5 * (prec0 + prec1);
      ++j;
    }
    ++r;
  }
  return ap / static_cast<double>(npos);
}

std::optional<double> precision_at_10(std::span<const std::string> ranking, const IdSet& positives,
                                      const IdSet& junk) {
  if (effective_positives(positives, junk) == 0) return std::nullopt;
  std::size_t seen = 0, hits = 0;
  for (const std::string& id : ranking) {
    if (seen == 10) break;
    if (junk.count(id)) continue;
    hits += positives.count(id);
    ++seen;
  }
  return static_cast<double>(hits) / 10.0;
}

void RetrievalGroundTruth::validate() const {
  std::set<std::string> query_ids;
  for (const QueryTruth& q : queries) {
    if (!query_ids.insert(q.id).second) {
      throw std::invalid_argument("ground truth: query '" + q.id + "' listed twice");
    }
    std::map<std::string, const char*> seen;
    auto add = [&](const std::vector<std::string>& list, const char* name) {
      for (const std::string& id : list) {
        if (id == q.id) {
          throw std::invalid_argument("ground truth: query '" + q.id + "' appears in its own " + name + " list");
        }
        auto [it, fresh] = seen.emplace(id, name);
        if (!fresh) {
          throw std::invalid_argument("ground truth: id '" + id + "' of query '" + q.id + "' is in both " +
                                      it->second + " and " + name);
        }
      }
    };
    add(q.easy, "easy");
    add(q.hard, "hard");
    add(q.junk, "junk");
  }
}

RetrievalGroundTruth parse_ground_truth(const std::string& json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError("ground truth", e.byte, "json", e.what());
  }
  if (!j.is_object() || !j.contains("queries") || !j["queries"].is_array()) {
    throw FormatError("ground truth", 0, "queries", "expected an object with a 'queries' array");
  }
  RetrievalGroundTruth gt;
  std::size_t index = 0;
  for (const json& q : j["queries"]) {
    const std::string where = "queries[" + std::to_string(index++) + "]";
    try {
      QueryTruth t;
      t.id = q.at("id").get<std::string>();
      for (auto [key, list] : {std::pair{"easy", &t.easy}, {"hard", &t.hard}, {"junk", &t.junk}}) {
        if (q.contains(key)) *list = q.at(key).get<std::vector<std::string>>();
      }
      gt.queries.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw FormatError("ground truth", 0, where, e.what());
    }
  }
  gt.validate();
  return gt;
}

RetrievalGroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ground truth " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ground_truth(ss.str());
}

std::string ground_truth_json(const RetrievalGroundTruth& gt) {
  nlohmann::json queries = nlohmann::json::array();
  for (const QueryTruth& q : gt.queries) {
    queries.push_back({{"id", q.id}, {"easy", q.easy}, {"hard", q.hard}, {"junk", q.junk}});
  }
  return nlohmann::json{{"queries", queries}}.dump(2);
}

Protocol parse_protocol(const std::string& name) {
  if (name == "medium") return Protocol::medium;
  if (name == "hard") return Protocol::hard;
  throw std::invalid_argument("unknown protocol '" + name + "' (expected medium or hard)");
}

std::string protocol_name(Protocol p) { return p == Protocol::medium ? "medium" : "hard"; }

ProtocolSets protocol_sets(const QueryTruth& q, Protocol protocol) {
  ProtocolSets s;
  s.junk.insert(q.junk.begin(), q.junk.end());
  s.positives.insert(q.hard.begin(), q.hard.end());
  if (protocol == Protocol::medium) {
    s.positives.insert(q.easy.begin(), q.easy.end());
  } else {
    s.junk.insert(q.easy.begin(), q.easy.end());
  }
  return s;
}

ProtocolReport map_protocol(std::span<const Descriptor> descs, const RetrievalGroundTruth& gt,
                            Protocol protocol) {
  gt.validate();
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < descs.size(); ++i) {
    if (!by_id.emplace(descs[i].id, i).second) {
      throw std::invalid_argument("map_protocol: duplicate descriptor id '" + descs[i].id + "'");
    }
  }
  std::set<std::string> query_ids;
  for (const QueryTruth& q : gt.queries) query_ids.insert(q.id);
  std::vector<Descriptor> db;
  for (const Descriptor& d : descs) {
    if (!query_ids.count(d.id)) db.push_back(d);
  }
  std::set<std::string> db_ids;
  for (const Descriptor& d : db) db_ids.insert(d.id);

  ProtocolReport report;
  report.protocol = protocol;
  double sum_ap = 0.0, sum_p10 = 0.0;
  for (const QueryTruth& q : gt.queries) {
    const auto it = by_id.find(q.id);
    if (it == by_id.end()) throw std::invalid_argument("map_protocol: query '" + q.id + "' has no descriptor");
    for (const auto* list : {&q.easy, &q.hard, &q.junk}) {
      for (const std::string& id : *list) {
        if (!db_ids.count(id)) {
          throw std::invalid_argument("map_protocol: query '" + q.id + "' references unknown id '" + id + "'");
        }
      }
    }
    const RankedList ranked = rank(descs[it->second], db);
    const ProtocolSets sets = protocol_sets(q, protocol);
    QueryScore score{q.id, average_precision(ranked.ids, sets.positives, sets.junk),
                     precision_at_10(ranked.ids, sets.positives, sets.junk)};
    if (score.ap) {
      sum_ap += *score.ap;
      sum_p10 += *score.p10;
      ++report.evaluated;
    } else {
      std::cerr << "warning: query '" << q.id << "' has no " << protocol_name(protocol)
                << " positives; skipped\n";
    }
    report.queries.push_back(std::move(score));
  }
  if (report.evaluated > 0) {
    report.mean_ap = sum_ap / static_cast<double>(report.evaluated);
    report.mean_p10 = sum_p10 / static_cast<double>(report.evaluated);
  }
  return report;
}

std::string report_json(const ProtocolReport& report) {
  using nlohmann::json;
  json queries = json::array();
  for (const QueryScore& q : report.queries) {
    json entry{{"id", q.id}, {"skipped", !q.ap.has_value()}};
    entry["ap"] = q.ap ? json(*q.ap) : json(nullptr);
    entry["p10"] = q.p10 ? json(*q.p10) : json(nullptr);
    queries.push_back(std::move(entry));
  }
  json j{{"protocol", protocol_name(report.protocol)},
         {"mAP", report.mean_ap},
         {"mP@10", report.mean_p10},
         {"evaluated", report.evaluated},
         {"skipped", report.queries.size() - report.evaluated},
         {"queries", queries}};
  return j.dump(2);
}

std::string report_text(const ProtocolReport& report) {
  std::size_t width = 5;
  for (const QueryScore& q : report.queries) width = std::max(width, q.id.size());
  std::ostringstream out;
  char buf[64];
  auto field = [&](const std::optional<double>& v) {
    if (!v) return std::string("skipped");
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  out << "protocol " << protocol_name(report.protocol) << "\n";
  out << std::string("query") << std::string(width - 5 + 2, ' ') << "       AP     P@10\n";
  for (const QueryScore& q : report.queries) {
    std::snprintf(buf, sizeof buf, "%9s%9s", field(q.ap).c_str(), field(q.p10).c_str());
    out << q.id << std::string(width - q.id.size() + 2, ' ') << buf << "\n";
  }
  std::snprintf(buf, sizeof buf, "%9.4f%9.4f", report.mean_ap, report.mean_p10);
  out << "mean" << std::string(width - 4 + 2, ' ') << buf << "\n";
  out << "evaluated " << report.evaluated << " of " << report.queries.size() << " queries\n";
  return out.str();
}

}  // namespace glam
