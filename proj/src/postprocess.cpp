#include "engrave/postprocess.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>

#include "engrave/error.h"

namespace engrave {
namespace {

constexpr double kForbidden = 1e6;

int argmax_of(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Most frequent value; ties go to the smallest value.
int majority(const std::vector<int>& values) {
  std::map<int, int> counts;
  for (int v : values) ++counts[v];
  int best = values.front(), best_count = 0;
  for (const auto& [v, c] : counts) {
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  }
  return best;
}

std::vector<std::vector<std::pair<int, double>>> successor_table(const PredictionBundle& bundle) {
  std::vector<std::vector<std::pair<int, double>>> table(bundle.note_count());
  for (std::size_t i = 0; i < bundle.voice_pairs.size(); ++i) {
    const auto& [u, w] = bundle.voice_pairs[i];
    table[u].emplace_back(w, bundle.voice_prob[i]);
  }
  for (auto& row : table) std::sort(row.begin(), row.end());
  return table;
}

// Note ids of one staff, grouped by onset, in time order.
std::vector<std::vector<int>> staff_onset_groups(const Score& score, const LabelSet& labels,
                                                 Staff staff) {
  std::vector<std::vector<int>> groups;
  for (int id : canonical_order(score.notes)) {
    if (labels.notes[id].staff != staff) continue;
    if (groups.empty() || score.notes[groups.back().front()].onset_div != score.notes[id].onset_div) {
      groups.emplace_back();
    }
    groups.back().push_back(id);
  }
  return groups;
}

}  // namespace

UnionFind::UnionFind(int n) : parent_(n), rank_(n, 0) {
  std::iota(parent_.begin(), parent_.end(), 0);
}

int UnionFind::find(int x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

void UnionFind::unite(int a, int b) {
  a = find(a);
  b = find(b);
  if (a == b) return;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
}

std::vector<int> connected_components(int n, const std::vector<NotePair>& edges) {
  UnionFind uf(n);
  for (const auto& [a, b] : edges) uf.unite(a, b);
  std::vector<int> smallest(n, n);
  for (int i = 0; i < n; ++i) smallest[uf.find(i)] = std::min(smallest[uf.find(i)], i);
  std::vector<int> label(n);
  for (int i = 0; i < n; ++i) label[i] = smallest[uf.find(i)];
  return label;
}

Assignment hungarian(const std::vector<std::vector<double>>& cost) {
  Assignment result;
  const int rows = static_cast<int>(cost.size());
  if (rows == 0) return result;
  const int cols = static_cast<int>(cost.front().size());
  if (rows > cols) {
    std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) t[j][i] = cost[i][j];
    }
    const Assignment transposed = hungarian(t);
    result.col_of_row.assign(rows, -1);
    for (int j = 0; j < cols; ++j) result.col_of_row[transposed.col_of_row[j]] = j;
    result.cost = transposed.cost;
    return result;
  }
  // Shortest augmenting paths with row/column potentials; 1-based, column 0
  // is the virtual source.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> match(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, kInf);
    std::vector<bool> used(cols + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  result.col_of_row.assign(rows, -1);
  for (int j = 1; j <= cols; ++j) {
    if (match[j] != 0) result.col_of_row[match[j] - 1] = j - 1;
  }
  for (int i = 0; i < rows; ++i) result.cost += cost[i][result.col_of_row[i]];
  return result;
}

int PooledNode::argmax(NodeHead h) const { return argmax_of(logits[static_cast<int>(h)]); }

std::vector<PooledNode> pool_chords(const PredictionBundle& bundle, const Score& score,
                                    double threshold) {
  const int n = static_cast<int>(score.notes.size());
  if (bundle.note_count() != n) {
    throw Error(ErrorCode::kShapeMismatch, "bundle covers a different number of notes");
  }
  std::vector<int> staff(n);
  for (int id = 0; id < n; ++id) staff[id] = bundle.argmax(NodeHead::kStaff, id);
  std::vector<NotePair> accepted;
  for (std::size_t i = 0; i < bundle.chord_pairs.size(); ++i) {
    const auto& [a, b] = bundle.chord_pairs[i];
    if (bundle.chord_prob[i] >= threshold &&
        score.notes[a].duration_div == score.notes[b].duration_div && staff[a] == staff[b]) {
      accepted.emplace_back(a, b);
    }
  }
  const auto label = connected_components(n, accepted);
  std::map<int, int> pool_of_label;
  std::vector<PooledNode> pools;
  for (int id : canonical_order(score.notes)) {
    auto [it, fresh] = pool_of_label.emplace(label[id], static_cast<int>(pools.size()));
    if (fresh) {
      PooledNode p;
      p.onset = score.notes[id].onset_div;
      p.duration = score.notes[id].duration_div;
      p.staff = static_cast<Staff>(staff[id]);
      p.bar = score.notes[id].bar_index;
      pools.push_back(std::move(p));
    }
    pools[it->second].members.push_back(id);
  }
  for (auto& p : pools) {
    for (NodeHead h : kPooledHeads) {
      const auto& m = bundle.logits(h);
      std::vector<double> mean(m.cols, 0.0);
      for (int id : p.members) {
        for (int c = 0; c < m.cols; ++c) mean[c] += m(id, c);
      }
      for (double& x : mean) x /= static_cast<double>(p.members.size());
      p.logits[static_cast<int>(h)] = std::move(mean);
    }
  }
  return pools;
}

double lifted_probability(const PooledNode& a, const PooledNode& b,
                          const std::vector<std::vector<std::pair<int, double>>>& successors,
                          bool mean_lift) {
  double best = 0.0, total = 0.0;
  for (int u : a.members) {
    const auto& row = successors[u];
    for (int w : b.members) {
      auto it = std::lower_bound(row.begin(), row.end(), std::make_pair(w, -1.0));
      if (it == row.end() || it->first != w) continue;
      best = std::max(best, it->second);
      total += it->second;
    }
  }
  if (!mean_lift) return best;
  return total / static_cast<double>(a.members.size() * b.members.size());
}

std::vector<std::vector<int>> assign_voices(const std::vector<PooledNode>& pools,
                                            const PredictionBundle& bundle, double threshold) {
  PostprocessOptions options;
  options.voice_threshold = threshold;
  return assign_voices(pools, bundle, options);
}

std::vector<std::vector<int>> assign_voices(const std::vector<PooledNode>& pools,
                                            const PredictionBundle& bundle,
                                            const PostprocessOptions& options) {
  const auto successors = successor_table(bundle);
  const double dummy = -std::log(options.voice_threshold);
  std::vector<std::vector<int>> streams;
  for (Staff staff : {Staff::kUpper, Staff::kLower}) {
    std::vector<int> open;  // stream indices still able to continue
    std::size_t i = 0;
    std::vector<int> order;
    for (int p = 0; p < static_cast<int>(pools.size()); ++p) {
      if (pools[p].staff == staff) order.push_back(p);
    }
    while (i < order.size()) {
      std::vector<int> group;
      const Tick onset = pools[order[i]].onset;
      while (i < order.size() && pools[order[i]].onset == onset) group.push_back(order[i++]);
      const int bar = pools[group.front()].bar;

      std::erase_if(open, [&](int s) { return pools[streams[s].back()].bar + 1 < bar; });
      std::vector<int> ends;
      for (int s : open) {
        if (pools[streams[s].back()].offset() <= onset) ends.push_back(s);
      }
      const int m = static_cast<int>(ends.size());
      const int k = static_cast<int>(group.size());
      std::vector<int> matched_stream(k, -1);
      if (m > 0) {
        // Rows: open ends then "new voice" dummies; columns: the group's
        // pools then "voice pauses" dummies.
        std::vector<std::vector<double>> cost(m + k, std::vector<double>(m + k, dummy));
        for (int r = 0; r < m; ++r) {
          for (int c = 0; c < k; ++c) {
            const double p = lifted_probability(pools[streams[ends[r]].back()], pools[group[c]],
                                                successors, options.mean_lift);
            cost[r][c] = p > 0.0 ? -std::log(p) : kForbidden;
          }
        }
        const Assignment a = hungarian(cost);
        for (int r = 0; r < m; ++r) {
          const int c = a.col_of_row[r];
          if (c < k) matched_stream[c] = ends[r];
        }
      }
      for (int c = 0; c < k; ++c) {
        if (matched_stream[c] >= 0) {
          streams[matched_stream[c]].push_back(group[c]);
        } else {
          open.push_back(static_cast<int>(streams.size()));
          streams.push_back({group[c]});
        }
      }
    }
  }
  std::sort(streams.begin(), streams.end(), [&](const auto& a, const auto& b) {
    return a.front() < b.front();
  });
  return streams;
}

std::vector<int> vote_measure_keys(const Score& score, const std::vector<int>& note_keys) {
  std::vector<std::vector<int>> per_bar(score.bar_count);
  for (const auto& n : score.notes) per_bar[n.bar_index].push_back(note_keys[n.id]);
  std::vector<int> keys(score.bar_count, 0);
  std::optional<int> previous;
  for (int b = 0; b < score.bar_count; ++b) {
    if (per_bar[b].empty()) continue;
    std::map<int, int> counts;
    for (int k : per_bar[b]) ++counts[k];
    int best_count = 0;
    for (const auto& [k, c] : counts) best_count = std::max(best_count, c);
    int chosen = std::numeric_limits<int>::max();
    for (const auto& [k, c] : counts) {
      if (c == best_count) chosen = std::min(chosen, k);
    }
    if (previous && counts.contains(*previous) && counts[*previous] == best_count) chosen = *previous;
    keys[b] = chosen;
    previous = chosen;
  }
  // Empty bars repeat the key before them; leading empty bars take the first.
  std::optional<int> carry;
  for (int b = 0; b < score.bar_count && !carry; ++b) {
    if (!per_bar[b].empty()) carry = keys[b];
  }
  for (int b = 0; b < score.bar_count; ++b) {
    if (!per_bar[b].empty()) carry = keys[b];
    keys[b] = carry.value_or(0);
  }
  return keys;
}

std::vector<int> smooth_labels(std::vector<int> values) {
  const std::size_t n = values.size();
  if (n < 3) return values;
  while (true) {
    std::vector<int> next = values;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (values[i - 1] == values[i + 1]) next[i] = values[i - 1];
    }
    if (next == values) return values;
    values = std::move(next);
  }
}

std::vector<EngravedEvent> fill_rests(Tick from, Tick to, Tick bar_onset, int divisions) {
  struct Candidate {
    Tick length;
    NoteType type;
    int dots;
    int tuplet;
  };
  std::vector<Candidate> vocab;
  for (int t = 0; t < kNumNoteTypes; ++t) {
    for (int dots = 0; dots <= 1; ++dots) {
      for (int tuplet : {1, 3, 5}) {
        if (auto len = symbolic_length(static_cast<NoteType>(t), dots, tuplet, divisions)) {
          if (*len > 0) vocab.push_back({*len, static_cast<NoteType>(t), dots, tuplet});
        }
      }
    }
  }
  std::sort(vocab.begin(), vocab.end(), [](const Candidate& a, const Candidate& b) {
    if (a.length != b.length) return a.length > b.length;
    if (a.tuplet != b.tuplet) return a.tuplet < b.tuplet;
    return a.dots < b.dots;
  });
  std::vector<EngravedEvent> rests;
  Tick pos = from;
  while (pos < to) {
    const Tick remaining = to - pos;
    const Candidate* pick = nullptr;
    for (const auto& c : vocab) {
      if (c.length <= remaining && (pos - bar_onset) % c.length == 0) {
        pick = &c;
        break;
      }
    }
    if (!pick) {
      for (const auto& c : vocab) {
        if (c.length <= remaining) {
          pick = &c;
          break;
        }
      }
    }
    if (!pick) {
      throw Error(ErrorCode::kUnfillableGap,
                  "gap of " + std::to_string(remaining) + " divisions at tick " +
                      std::to_string(pos) + " has no rest value");
    }
    EngravedEvent r;
    r.onset = pos;
    r.duration = pick->length;
    r.type = pick->type;
    r.dots = pick->dots;
    r.tuplet = pick->tuplet;
    rests.push_back(r);
    pos += pick->length;
  }
  return rests;
}

namespace {

void mark_tuplets(std::vector<EngravedEvent>& events, int divisions) {
  std::size_t i = 0;
  while (i < events.size()) {
    if (events[i].tuplet == 1) {
      ++i;
      continue;
    }
    const int tuplet = events[i].tuplet;
    const auto base = symbolic_length(events[i].type, 0, 1, divisions);
    const Tick span = base ? *base * tuplet_normal_notes(tuplet) : 0;
    events[i].tuplet_start = true;
    Tick acc = 0;
    std::size_t j = i;
    for (; j < events.size() && events[j].tuplet == tuplet; ++j) {
      if (j > i && acc == 0) events[j].tuplet_start = true;
      acc += events[j].duration;
      if (span > 0 && acc >= span) {
        events[j].tuplet_stop = true;
        acc = 0;
      }
    }
    if (!events[j - 1].tuplet_stop) events[j - 1].tuplet_stop = true;
    i = j;
  }
}

EngravedEvent note_event(const Score& score, const LabelSet& labels, const std::vector<int>& ids) {
  EngravedEvent e;
  e.notes = ids;
  std::sort(e.notes.begin(), e.notes.end(), [&](int a, int b) {
    return score.notes[a].midi_pitch != score.notes[b].midi_pitch
               ? score.notes[a].midi_pitch < score.notes[b].midi_pitch
               : a < b;
  });
  const QuantizedNote& head = score.notes[e.notes.front()];
  const NoteLabels& l = labels.notes[e.notes.front()];
  e.onset = head.onset_div;
  e.duration = head.duration_div;
  e.type = l.note_type;
  e.dots = l.dots;
  e.tuplet = l.tuplet;
  e.stem = l.stem;
  return e;
}

}  // namespace

EngravedScore assemble_engraved(const Score& score, LabelSet labels,
                                const std::vector<std::vector<std::vector<int>>>& streams,
                                std::vector<int> measure_keys) {
  EngravedScore out;
  out.score = score;
  out.measure_keys = std::move(measure_keys);
  const auto bars = score.bars();
  labels.voice_edges.clear();
  labels.chord_edges.clear();

  for (const auto& stream : streams) {
    if (stream.empty()) continue;
    EngravedVoice voice;
    std::vector<EngravedEvent> chords;
    for (const auto& unit : stream) {
      chords.push_back(note_event(score, labels, unit));
      const auto& members = chords.back().notes;
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
          labels.chord_edges.emplace_back(std::min(members[a], members[b]),
                                          std::max(members[a], members[b]));
        }
      }
      if (chords.size() > 1) {
        for (int u : chords[chords.size() - 2].notes) {
          for (int w : members) labels.voice_edges.emplace_back(u, w);
        }
      }
    }
    const QuantizedNote& first = score.notes[chords.front().notes.front()];
    voice.staff = labels.notes[first.id].staff;
    voice.first_bar = first.bar_index;
    voice.last_bar = score.notes[chords.back().notes.front()].bar_index;
    std::size_t c = 0;
    for (int b = voice.first_bar; b <= voice.last_bar; ++b) {
      const Bar& bar = bars[b];
      std::vector<EngravedEvent> events;
      Tick pos = bar.onset;
      for (; c < chords.size() && chords[c].onset < bar.onset + bar.duration; ++c) {
        if (chords[c].onset < pos) {
          throw Error(ErrorCode::kInconsistentTiming,
                      "voice events overlap at tick " + std::to_string(chords[c].onset));
        }
        auto rests = fill_rests(pos, chords[c].onset, bar.onset, score.divisions_per_quarter);
        events.insert(events.end(), rests.begin(), rests.end());
        events.push_back(chords[c]);
        pos = chords[c].offset();
      }
      auto rests = fill_rests(pos, bar.onset + bar.duration, bar.onset, score.divisions_per_quarter);
      events.insert(events.end(), rests.begin(), rests.end());
      mark_tuplets(events, score.divisions_per_quarter);
      voice.events.insert(voice.events.end(), events.begin(), events.end());
    }
    out.voices.push_back(std::move(voice));
  }

  for (Staff staff : {Staff::kUpper, Staff::kLower}) {
    const auto groups = staff_onset_groups(score, labels, staff);
    const Clef fallback = staff == Staff::kUpper ? Clef::kG : Clef::kF;
    out.clefs.push_back({staff, 0, groups.empty() ? fallback : labels.notes[groups[0][0]].clef});
    for (std::size_t g = 1; g < groups.size(); ++g) {
      const Clef clef = labels.notes[groups[g][0]].clef;
      if (clef != labels.notes[groups[g - 1][0]].clef) {
        out.clefs.push_back({staff, score.notes[groups[g][0]].onset_div, clef});
      }
    }
    for (std::size_t g = 0; g < groups.size();) {
      const OctaveShift shift = labels.notes[groups[g][0]].octave_shift;
      std::size_t e = g;
      Tick max_offset = 0;
      while (e < groups.size() && labels.notes[groups[e][0]].octave_shift == shift) {
        for (int id : groups[e]) max_offset = std::max(max_offset, score.notes[id].offset_div());
        ++e;
      }
      if (shift != OctaveShift::kNone) {
        Tick stop = max_offset;
        if (e < groups.size()) stop = std::min(stop, score.notes[groups[e][0]].onset_div);
        out.brackets.push_back({staff, score.notes[groups[g][0]].onset_div, stop, shift});
      }
      g = e;
    }
  }

  std::sort(labels.voice_edges.begin(), labels.voice_edges.end());
  std::sort(labels.chord_edges.begin(), labels.chord_edges.end());
  out.score.labels = std::move(labels);
  return out;
}

EngravedScore unpool_and_finalize(const std::vector<std::vector<int>>& streams,
                                  const std::vector<PooledNode>& pools,
                                  const PredictionBundle& bundle, const Score& score) {
  const int n = static_cast<int>(score.notes.size());
  LabelSet labels;
  labels.notes.resize(n);
  std::vector<int> note_keys(n, 0);
  for (const auto& pool : pools) {
    for (int id : pool.members) {
      NoteLabels& l = labels.notes[id];
      l.staff = pool.staff;
      for (NodeHead h : {NodeHead::kNoteType, NodeHead::kDots, NodeHead::kTuplet, NodeHead::kStem}) {
        set_label_class(l, h, pool.argmax(h));
      }
      note_keys[id] = pool.argmax(NodeHead::kKey) - 7;
      l.octave_shift = static_cast<OctaveShift>(bundle.argmax(NodeHead::kOctaveShift, id));
      l.clef = static_cast<Clef>(bundle.argmax(NodeHead::kClef, id));
    }
  }
  // Spelling: best class among those that sound as the note's pitch class.
  const auto& spelling = bundle.logits(NodeHead::kSpelling);
  for (const auto& note : score.notes) {
    double best = -std::numeric_limits<double>::infinity();
    for (const Spelling& s : enharmonic_spellings(note.pitch_class)) {
      const double v = spelling(note.id, spelling_class(s));
      if (v > best) {
        best = v;
        labels.notes[note.id].spelling = s;
      }
    }
  }
  const auto keys = vote_measure_keys(score, note_keys);
  for (const auto& note : score.notes) labels.notes[note.id].key_fifths = keys[note.bar_index];

  // Clef and octave shift: one value per onset group of a staff, then the
  // clef sequence is smoothed.
  for (Staff staff : {Staff::kUpper, Staff::kLower}) {
    const auto groups = staff_onset_groups(score, labels, staff);
    std::vector<int> clefs;
    for (const auto& g : groups) {
      std::vector<int> votes, shifts;
      for (int id : g) {
        votes.push_back(static_cast<int>(labels.notes[id].clef));
        shifts.push_back(static_cast<int>(labels.notes[id].octave_shift));
      }
      clefs.push_back(majority(votes));
      const auto shift = static_cast<OctaveShift>(majority(shifts));
      for (int id : g) labels.notes[id].octave_shift = shift;
    }
    clefs = smooth_labels(std::move(clefs));
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (int id : groups[g]) labels.notes[id].clef = static_cast<Clef>(clefs[g]);
    }
  }

  std::vector<std::vector<std::vector<int>>> note_streams;
  for (const auto& stream : streams) {
    auto& out = note_streams.emplace_back();
    for (int p : stream) out.push_back(pools[p].members);
  }
  return assemble_engraved(score, std::move(labels), note_streams, keys);
}

EngravedScore postprocess(const PredictionBundle& bundle, const Score& score,
                          const PostprocessOptions& options) {
  const auto pools = pool_chords(bundle, score, options.chord_threshold);
  const auto streams = assign_voices(pools, bundle, options);
  return unpool_and_finalize(streams, pools, bundle, score);
}

EngravedScore engrave_from_labels(const Score& score) {
  if (!score.labels) throw Error(ErrorCode::kLengthMismatch, "score carries no labels");
  const LabelSet& labels = *score.labels;
  const int n = static_cast<int>(score.notes.size());
  const auto unit = connected_components(n, labels.chord_edges);
  std::vector<int> next(n, -1), has_prev(n, 0);
  for (const auto& [u, w] : labels.voice_edges) {
    next[unit[u]] = unit[w];
    has_prev[unit[w]] = 1;
  }
  std::map<int, std::vector<int>> members;
  for (int id : canonical_order(score.notes)) members[unit[id]].push_back(id);
  std::vector<std::vector<std::vector<int>>> streams;
  for (int id : canonical_order(score.notes)) {
    if (unit[id] != id || has_prev[id]) continue;
    auto& stream = streams.emplace_back();
    for (int u = id; u >= 0; u = next[u]) stream.push_back(members[u]);
  }
  std::vector<int> note_keys(n);
  for (int id = 0; id < n; ++id) note_keys[id] = labels.notes[id].key_fifths;
  return assemble_engraved(score, labels, streams, vote_measure_keys(score, note_keys));
}

std::vector<std::string> check_engraved(const EngravedScore& engraved) {
  std::vector<std::string> problems;
  const Score& score = engraved.score;
  const auto bars = score.bars();
  std::vector<int> seen(score.notes.size(), 0);
  for (std::size_t v = 0; v < engraved.voices.size(); ++v) {
    const auto& voice = engraved.voices[v];
    const std::string where = "voice " + std::to_string(v);
    for (std::size_t i = 0; i < voice.events.size(); ++i) {
      const auto& e = voice.events[i];
      for (int id : e.notes) {
        if (id < 0 || id >= static_cast<int>(seen.size())) {
          problems.push_back(where + ": unknown note id " + std::to_string(id));
          continue;
        }
        ++seen[id];
        if (score.notes[id].onset_div != e.onset || score.notes[id].duration_div != e.duration) {
          problems.push_back(where + ": note " + std::to_string(id) + " timing differs from its event");
        }
      }
      if (e.duration <= 0) problems.push_back(where + ": empty event");
      if (i > 0 && voice.events[i - 1].offset() > e.onset) {
        problems.push_back(where + ": overlapping events at tick " + std::to_string(e.onset));
      }
      if (e.is_rest()) {
        auto len = symbolic_length(e.type, e.dots, e.tuplet, score.divisions_per_quarter);
        if (!len || *len != e.duration) {
          problems.push_back(where + ": rest at tick " + std::to_string(e.onset) +
                             " has no matching symbolic value");
        }
      }
    }
    for (int b = voice.first_bar; b <= voice.last_bar; ++b) {
      if (b < 0 || b >= static_cast<int>(bars.size())) {
        problems.push_back(where + ": bar out of range");
        continue;
      }
      const Tick start = bars[b].onset, end = start + bars[b].duration;
      Tick sum = 0, pos = start;
      bool contiguous = true;
      for (const auto& e : voice.events) {
        if (e.onset < start || e.onset >= end) continue;
        if (e.onset != pos || e.offset() > end) contiguous = false;
        pos = e.offset();
        sum += e.duration;
      }
      if (sum != bars[b].duration || !contiguous) {
        problems.push_back(where + ": bar " + std::to_string(b + 1) + " sums to " +
                           std::to_string(sum) + " of " + std::to_string(bars[b].duration));
      }
    }
    for (const auto& e : voice.events) {
      if (e.onset < bars[voice.first_bar].onset ||
          e.offset() > bars[voice.last_bar].onset + bars[voice.last_bar].duration) {
        problems.push_back(where + ": event outside the voice's bars");
      }
    }
  }
  for (std::size_t id = 0; id < seen.size(); ++id) {
    if (seen[id] != 1) {
      problems.push_back("note " + std::to_string(id) + " appears " + std::to_string(seen[id]) +
                         " times");
    }
  }
  for (Staff staff : {Staff::kUpper, Staff::kLower}) {
    const bool initial = std::any_of(engraved.clefs.begin(), engraved.clefs.end(),
                                     [&](const ClefChange& c) { return c.staff == staff && c.time == 0; });
    if (!initial) problems.push_back("staff without an initial clef");
  }
  if (!score.labels || score.labels->notes.size() != score.notes.size()) {
    problems.push_back("final labels missing");
  }
  if (static_cast<int>(engraved.measure_keys.size()) != score.bar_count) {
    problems.push_back("measure key count differs from bar count");
  }
  return problems;
}

}  // namespace engrave
