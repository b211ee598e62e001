#include "engrave/graph.h"

#include <algorithm>
#include <ostream>

#include <json.hpp>

#include "engrave/error.h"

namespace engrave {
namespace {

constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "onset",     "during",     "follow",     "silence",
    "inv_onset", "inv_during", "inv_follow", "inv_silence"};

// Notes in canonical order together with each id's rank in that order.
struct Ordered {
  std::vector<const QuantizedNote*> notes;
  std::vector<int> rank;  // by id
};

Ordered order_notes(const Score& score) {
  if (score.notes.empty()) throw Error(ErrorCode::kEmptyScore, "score has no notes");
  std::vector<const QuantizedNote*> by_id(score.notes.size(), nullptr);
  for (const auto& n : score.notes) {
    if (n.id < 0 || n.id >= static_cast<int>(by_id.size()) || by_id[n.id]) {
      throw Error(ErrorCode::kInconsistentTiming, "note ids must be 0..n-1");
    }
    by_id[n.id] = &n;
  }
  Ordered o;
  const auto ids = canonical_order(score.notes);
  o.rank.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    o.notes.push_back(by_id[ids[i]]);
    o.rank[ids[i]] = static_cast<int>(i);
  }
  return o;
}

}  // namespace

std::string_view relation_name(Relation r) {
  return kRelationNames[static_cast<int>(r)];
}

std::size_t ScoreGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& e : edges) total += e.size();
  return total;
}

std::vector<NotePair> candidate_pairs(const Score& score, CandidateOptions options) {
  if (score.notes.empty()) return {};
  const Ordered o = order_notes(score);
  const auto& v = o.notes;
  std::vector<NotePair> out;
  // Notes are sorted by onset, so every w after u's offset lies in a suffix.
  for (std::size_t i = 0; i < v.size(); ++i) {
    const QuantizedNote& u = *v[i];
    auto first = std::lower_bound(
        v.begin(), v.end(), u.offset_div(),
        [](const QuantizedNote* n, Tick t) { return n->onset_div < t; });
    for (auto it = first; it != v.end(); ++it) {
      const QuantizedNote& w = **it;
      if (w.bar_index == u.bar_index) {
        out.emplace_back(u.id, w.id);
      } else if (options.cross_bar && w.bar_index == u.bar_index + 1 &&
                 w.onset_div == w.bar_onset_div) {
        out.emplace_back(u.id, w.id);
      } else if (w.bar_index > u.bar_index + 1 ||
                 (w.bar_index == u.bar_index + 1 && w.onset_div > w.bar_onset_div)) {
        break;
      }
    }
  }
  return out;
}

std::vector<NotePair> chord_candidate_pairs(const Score& score) {
  if (score.notes.empty()) return {};
  const Ordered o = order_notes(score);
  const auto& v = o.notes;
  std::vector<NotePair> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size() && v[j]->onset_div == v[i]->onset_div; ++j) {
      out.emplace_back(v[i]->id, v[j]->id);
    }
  }
  return out;
}

ScoreGraph build_graph(const Score& score, CandidateOptions options) {
  const Ordered o = order_notes(score);
  const auto& v = o.notes;
  const int n = static_cast<int>(v.size());

  ScoreGraph g;
  g.node_count = n;
  g.features.resize(n);
  for (const auto& note : score.notes) g.features[note.id] = compute_features(note).as_row();
  for (const auto* note : v) g.note_order.push_back(note->id);

  // Running maximum of offsets over the onset-sorted prefix; answers "does
  // any note still sound just after time t" for the silence rule.
  std::vector<Tick> prefix_max_offset(n);
  for (int i = 0; i < n; ++i) {
    prefix_max_offset[i] = std::max(i ? prefix_max_offset[i - 1] : Tick{0}, v[i]->offset_div());
  }
  auto lower = [&](Tick t) {
    return static_cast<int>(std::lower_bound(v.begin(), v.end(), t,
                                             [](const QuantizedNote* x, Tick t) {
                                               return x->onset_div < t;
                                             }) -
                            v.begin());
  };
  auto upper = [&](Tick t) {
    return static_cast<int>(std::upper_bound(v.begin(), v.end(), t,
                                             [](Tick t, const QuantizedNote* x) {
                                               return t < x->onset_div;
                                             }) -
                            v.begin());
  };

  auto add = [&](Relation r, int src, int dst) {
    g.edges[static_cast<int>(r)].push_back({src, dst});
    g.edges[static_cast<int>(r) + 4].push_back({dst, src});
  };

  for (int i = 0; i < n; ++i) {
    const QuantizedNote& u = *v[i];
    const Tick off = u.offset_div();
    // onset: later members of the same onset group.
    for (int j = i + 1; j < n && v[j]->onset_div == u.onset_div; ++j) {
      add(Relation::kOnset, u.id, v[j]->id);
    }
    // during: onsets strictly inside (onset, offset).
    for (int j = upper(u.onset_div); j < n && v[j]->onset_div < off; ++j) {
      add(Relation::kDuring, u.id, v[j]->id);
    }
    // follow: onsets exactly at the offset.
    const int at_offset = lower(off);
    int j = at_offset;
    for (; j < n && v[j]->onset_div == off; ++j) add(Relation::kFollow, u.id, v[j]->id);
    // silence: first onset group after a gap in which nothing sounds.
    if (j == at_offset && j < n) {
      const bool sounding = j > 0 && prefix_max_offset[j - 1] > off;
      if (!sounding) {
        const Tick next = v[j]->onset_div;
        for (int k = j; k < n && v[k]->onset_div == next; ++k) {
          add(Relation::kSilence, u.id, v[k]->id);
        }
      }
    }
  }
  for (auto& list : g.edges) std::sort(list.begin(), list.end());

  g.candidate_pairs = candidate_pairs(score, options);
  g.chord_candidates = chord_candidate_pairs(score);
  return g;
}

CoverageReport candidate_coverage(const std::vector<NotePair>& truth,
                                  const std::vector<NotePair>& candidates) {
  std::vector<NotePair> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  CoverageReport report;
  report.true_edges = truth.size();
  for (const auto& e : truth) {
    if (std::binary_search(sorted.begin(), sorted.end(), e)) {
      ++report.covered;
    } else {
      report.missing.push_back(e);
    }
  }
  return report;
}

void dump_graph_jsonl(const ScoreGraph& graph, std::ostream& out) {
  for (int r = 0; r < kNumRelations; ++r) {
    for (const auto& e : graph.edges[r]) {
      nlohmann::json rec = {{"relation", kRelationNames[r]}, {"src", e.src}, {"dst", e.dst}};
      out << rec.dump() << '\n';
    }
  }
}

}  // namespace engrave
