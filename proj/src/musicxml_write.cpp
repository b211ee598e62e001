#include <algorithm>
#include <map>
#include <sstream>
#include <string>

#include "engrave/error.h"
#include "engrave/musicxml.h"

namespace engrave {
namespace {

constexpr std::string_view kHeader =
    "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
    "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" "
    "\"http://www.musicxml.org/dtds/partwise.dtd\">\n";

class XmlWriter {
 public:
  void open(const std::string& tag, const std::string& attrs = {}) {
    line("<" + tag + attrs + ">");
    stack_.push_back(tag);
  }
  void close() {
    const std::string tag = stack_.back();
    stack_.pop_back();
    line("</" + tag + ">");
  }
  void leaf(const std::string& tag, const std::string& value) {
    line("<" + tag + ">" + value + "</" + tag + ">");
  }
  void empty(const std::string& tag, const std::string& attrs = {}) { line("<" + tag + attrs + "/>"); }
  std::string str() const { return out_.str(); }

  void raw(std::string_view text) { out_ << text; }

 private:
  void line(const std::string& text) {
    out_ << std::string(2 * stack_.size(), ' ') << text << '\n';
  }
  std::ostringstream out_;
  std::vector<std::string> stack_;
};

std::string attr(const std::string& name, const std::string& value) {
  return " " + name + "=\"" + value + "\"";
}

int staff_number(Staff s) { return s == Staff::kUpper ? 1 : 2; }

void write_clef(XmlWriter& w, Staff staff, Clef clef) {
  static constexpr std::array<std::pair<const char*, const char*>, 3> kSigns = {
      {{"G", "2"}, {"F", "4"}, {"C", "3"}}};
  const auto& [sign, line] = kSigns[static_cast<int>(clef)];
  w.open("clef", attr("number", std::to_string(staff_number(staff))));
  w.leaf("sign", sign);
  w.leaf("line", line);
  w.close();
}

struct MarkerOut {
  Tick time = 0;
  int kind = 0;  // 0 octave stop, 1 clef, 2 octave start
  Staff staff = Staff::kUpper;
  int value = 0;  // clef or shift
};

void write_marker(XmlWriter& w, const MarkerOut& m) {
  if (m.kind == 1) {
    w.open("attributes");
    write_clef(w, m.staff, static_cast<Clef>(m.value));
    w.close();
    return;
  }
  const auto shift = static_cast<OctaveShift>(m.value);
  const std::string size = shift == OctaveShift::k15ma ? "15" : "8";
  std::string type = "stop";
  if (m.kind == 2) type = shift == OctaveShift::k8vb ? "up" : "down";
  w.open("direction", attr("placement", shift == OctaveShift::k8vb ? "below" : "above"));
  w.open("direction-type");
  w.empty("octave-shift", attr("type", type) + attr("size", size));
  w.close();
  w.leaf("staff", std::to_string(staff_number(m.staff)));
  w.close();
}

void write_symbolic(XmlWriter& w, NoteType type, int dots, int tuplet) {
  w.leaf("type", std::string(note_type_name(type)));
  for (int d = 0; d < dots; ++d) w.empty("dot");
  if (tuplet != 1) {
    w.open("time-modification");
    w.leaf("actual-notes", std::to_string(tuplet));
    w.leaf("normal-notes", std::to_string(tuplet_normal_notes(tuplet)));
    w.close();
  }
}

void write_tuplet_marks(XmlWriter& w, const EngravedEvent& e) {
  if (!e.tuplet_start && !e.tuplet_stop) return;
  w.open("notations");
  if (e.tuplet_start) w.empty("tuplet", attr("type", "start"));
  if (e.tuplet_stop) w.empty("tuplet", attr("type", "stop"));
  w.close();
}

void write_event(XmlWriter& w, const EngravedScore& engraved, const EngravedEvent& e, int voice,
                 Staff home) {
  const Score& score = engraved.score;
  if (e.is_rest()) {
    auto len = symbolic_length(e.type, e.dots, e.tuplet, score.divisions_per_quarter);
    if (!len || *len != e.duration) {
      throw Error(ErrorCode::kUnrepresentableDuration,
                  "rest of " + std::to_string(e.duration) + " divisions at tick " +
                      std::to_string(e.onset) + " does not match its notated value");
    }
    w.open("note");
    w.empty("rest");
    w.leaf("duration", std::to_string(e.duration));
    w.leaf("voice", std::to_string(voice));
    write_symbolic(w, e.type, e.dots, e.tuplet);
    w.leaf("staff", std::to_string(staff_number(home)));
    write_tuplet_marks(w, e);
    w.close();
    return;
  }
  const LabelSet& labels = *score.labels;
  for (std::size_t i = 0; i < e.notes.size(); ++i) {
    const QuantizedNote& n = score.notes[e.notes[i]];
    const NoteLabels& l = labels.notes[n.id];
    w.open("note");
    if (i > 0) w.empty("chord");
    w.open("pitch");
    w.leaf("step", std::string(1, step_letter(l.spelling.step)));
    if (l.spelling.alter != 0) w.leaf("alter", std::to_string(l.spelling.alter));
    w.leaf("octave", std::to_string(spelled_octave(n.midi_pitch, l.spelling)));
    w.close();
    w.leaf("duration", std::to_string(n.duration_div));
    w.leaf("voice", std::to_string(voice));
    write_symbolic(w, l.note_type, l.dots, l.tuplet);
    if (l.stem != Stem::kNone) w.leaf("stem", l.stem == Stem::kUp ? "up" : "down");
    w.leaf("staff", std::to_string(staff_number(l.staff)));
    if (i == 0) write_tuplet_marks(w, e);
    w.close();
  }
}

void write_move(XmlWriter& w, Tick delta) {
  if (delta == 0) return;
  w.open(delta < 0 ? "backup" : "forward");
  w.leaf("duration", std::to_string(delta < 0 ? -delta : delta));
  w.close();
}

}  // namespace

int voice_number(Staff staff, int slot) {
  const int lower = staff == Staff::kLower ? 1 : 0;
  if (slot < 4) return slot + 1 + 4 * lower;
  return 9 + 2 * (slot - 4) + lower;
}

std::string export_musicxml(const EngravedScore& engraved) {
  const Score& score = engraved.score;
  if (!score.labels) throw Error(ErrorCode::kLengthMismatch, "engraved score has no labels");
  const auto bars = score.bars();
  if (bars.empty()) throw Error(ErrorCode::kEmptyScore, "score has no bars");

  // Voice numbers: a slot is reused only after a full bar without it, so a
  // reader never links two separate streams.
  std::vector<int> voice_no(engraved.voices.size());
  {
    std::vector<std::size_t> order(engraved.voices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return engraved.voices[a].first_bar < engraved.voices[b].first_bar;
    });
    std::array<std::vector<int>, 2> slot_last_bar;
    for (std::size_t v : order) {
      const auto& voice = engraved.voices[v];
      auto& slots = slot_last_bar[static_cast<int>(voice.staff)];
      std::size_t s = 0;
      while (s < slots.size() && slots[s] + 1 >= voice.first_bar) ++s;
      if (s == slots.size()) slots.push_back(0);
      slots[s] = voice.last_bar;
      voice_no[v] = voice_number(voice.staff, static_cast<int>(s));
    }
  }

  const Tick score_end = bars.back().onset + bars.back().duration;
  auto bar_of = [&](Tick t) {
    if (t >= score_end) return static_cast<int>(bars.size()) - 1;
    auto it = std::upper_bound(bars.begin(), bars.end(), t,
                               [](Tick x, const Bar& b) { return x < b.onset; });
    return static_cast<int>(it - bars.begin()) - 1;
  };
  std::vector<std::vector<MarkerOut>> markers(bars.size());
  for (const auto& c : engraved.clefs) {
    if (c.time > 0) markers[bar_of(c.time)].push_back({c.time, 1, c.staff, static_cast<int>(c.clef)});
  }
  for (const auto& b : engraved.brackets) {
    markers[bar_of(b.start)].push_back({b.start, 2, b.staff, static_cast<int>(b.shift)});
    markers[bar_of(b.stop)].push_back({b.stop, 0, b.staff, static_cast<int>(b.shift)});
  }
  for (auto& list : markers) {
    std::stable_sort(list.begin(), list.end(), [](const MarkerOut& a, const MarkerOut& b) {
      if (a.time != b.time) return a.time < b.time;
      if (a.kind != b.kind) return a.kind < b.kind;
      return a.staff < b.staff;
    });
  }

  XmlWriter w;
  w.raw(kHeader);
  w.open("score-partwise", attr("version", "3.1"));
  w.open("part-list");
  w.open("score-part", attr("id", "P1"));
  w.leaf("part-name", "Piano");
  w.close();
  w.close();
  w.open("part", attr("id", "P1"));

  std::size_t ts_next = 0;
  for (std::size_t m = 0; m < bars.size(); ++m) {
    const Bar& bar = bars[m];
    w.open("measure", attr("number", std::to_string(m + 1)));

    const bool key_change = m == 0 || engraved.measure_keys[m] != engraved.measure_keys[m - 1];
    bool time_change = false;
    while (ts_next < score.time_signatures.size() &&
           score.time_signatures[ts_next].bar_index <= static_cast<int>(m)) {
      time_change = true;
      ++ts_next;
    }
    if (m == 0) time_change = true;
    if (key_change || time_change) {
      w.open("attributes");
      if (m == 0) w.leaf("divisions", std::to_string(score.divisions_per_quarter));
      if (key_change) {
        w.open("key");
        w.leaf("fifths", std::to_string(engraved.measure_keys[m]));
        w.close();
      }
      if (time_change) {
        w.open("time");
        w.leaf("beats", std::to_string(bar.numerator));
        w.leaf("beat-type", std::to_string(bar.denominator));
        w.close();
      }
      if (m == 0) {
        w.leaf("staves", "2");
        for (Staff staff : {Staff::kUpper, Staff::kLower}) {
          for (const auto& c : engraved.clefs) {
            if (c.staff == staff && c.time == 0) {
              write_clef(w, staff, c.clef);
              break;
            }
          }
        }
      }
      w.close();
    }

    // Lanes in voice-number order; a staff with no voice here gets a
    // whole-measure rest.
    struct Lane {
      int voice = 0;
      Staff staff = Staff::kUpper;
      const EngravedVoice* source = nullptr;
    };
    std::vector<Lane> lanes;
    std::array<bool, 2> staffed{false, false};
    for (std::size_t v = 0; v < engraved.voices.size(); ++v) {
      const auto& voice = engraved.voices[v];
      if (voice.first_bar <= static_cast<int>(m) && static_cast<int>(m) <= voice.last_bar) {
        lanes.push_back({voice_no[v], voice.staff, &voice});
        staffed[static_cast<int>(voice.staff)] = true;
      }
    }
    for (Staff staff : {Staff::kUpper, Staff::kLower}) {
      if (!staffed[static_cast<int>(staff)]) lanes.push_back({voice_number(staff, 0), staff, nullptr});
    }
    std::sort(lanes.begin(), lanes.end(), [](const Lane& a, const Lane& b) { return a.voice < b.voice; });

    auto& pending = markers[m];
    std::vector<bool> done(pending.size(), false);
    auto flush_at = [&](Tick t) {
      for (std::size_t i = 0; i < pending.size(); ++i) {
        if (!done[i] && pending[i].time == t) {
          write_marker(w, pending[i]);
          done[i] = true;
        }
      }
    };

    const Tick bar_end = bar.onset + bar.duration;
    for (std::size_t l = 0; l < lanes.size(); ++l) {
      const Lane& lane = lanes[l];
      if (l > 0) write_move(w, -bar.duration);
      if (!lane.source) {
        flush_at(bar.onset);
        w.open("note");
        w.empty("rest", attr("measure", "yes"));
        w.leaf("duration", std::to_string(bar.duration));
        w.leaf("voice", std::to_string(lane.voice));
        w.leaf("staff", std::to_string(staff_number(lane.staff)));
        w.close();
        continue;
      }
      for (const auto& e : lane.source->events) {
        if (e.onset < bar.onset || e.onset >= bar_end) continue;
        flush_at(e.onset);
        write_event(w, engraved, e, lane.voice, lane.staff);
      }
    }
    Tick cursor = bar_end;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (done[i]) continue;
      write_move(w, pending[i].time - cursor);
      cursor = pending[i].time;
      write_marker(w, pending[i]);
    }
    w.close();
  }
  w.close();
  w.close();
  return w.str();
}

}  // namespace engrave
