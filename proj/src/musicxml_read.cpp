#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <spdlog/spdlog.h>

#include "engrave/archive.h"
#include "engrave/error.h"
#include "engrave/musicxml.h"

namespace engrave {
namespace {

using boost::property_tree::ptree;

// Presentation-only elements that carry nothing the model uses.
const std::set<std::string, std::less<>> kIgnoredRoot = {
    "work", "movement-number", "movement-title", "identification", "defaults", "credit"};
const std::set<std::string, std::less<>> kIgnoredMeasure = {
    "print", "barline", "sound", "harmony", "bookmark", "link", "grouping", "figured-bass"};
const std::set<std::string, std::less<>> kIgnoredNote = {
    "instrument", "footnote", "level", "tie", "accidental", "notehead", "notehead-text",
    "beam", "notations", "lyric", "play", "listen"};
const std::set<std::string, std::less<>> kIgnoredAttributes = {
    "footnote", "level", "part-symbol", "instruments", "staff-details", "directive",
    "measure-style", "for-part"};
const std::set<std::string, std::less<>> kIgnoredDirectionType = {
    "rehearsal", "segno", "coda", "words", "symbol", "wedge", "dynamics", "dashes",
    "bracket", "pedal", "metronome", "damp", "damp-all", "eyeglasses", "string-mute",
    "scordatura", "image", "principal-voice", "percussion", "accordion-registration",
    "staff-divide", "other-direction", "harp-pedals"};

bool is_markup(std::string_view name) {
  return name == "<xmlattr>" || name == "<xmlcomment>";
}

[[noreturn]] void unsupported(std::string_view element, const std::string& detail = {}) {
  std::string msg = "<" + std::string(element) + ">";
  if (!detail.empty()) msg += " " + detail;
  throw Error(ErrorCode::kUnsupportedElement, msg);
}

[[noreturn]] void timing(const std::string& msg) {
  throw Error(ErrorCode::kInconsistentTiming, msg);
}

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string text(const ptree& node) { return trimmed(node.data()); }

std::optional<std::string> attr(const ptree& node, const std::string& name) {
  if (auto a = node.get_child_optional("<xmlattr>." + name)) return trimmed(a->data());
  return std::nullopt;
}

long long integer(const ptree& node, std::string_view what) {
  const std::string t = text(node);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kMalformedXml, "<" + std::string(what) + "> is not an integer: '" + t + "'");
}

struct Marker {
  Tick time = 0;
  int order = 0;
  int value = 0;
};

// Value in effect at `t`: the last marker at or before t, document order
// breaking ties.
int value_at(const std::vector<Marker>& markers, Tick t, int fallback) {
  const Marker* best = nullptr;
  for (const auto& m : markers) {
    if (m.time > t) continue;
    if (!best || m.time > best->time || (m.time == best->time && m.order > best->order)) {
      best = &m;
    }
  }
  return best ? best->value : fallback;
}

struct PendingNote {
  RawNote raw;
  NoteLabels labels;  // key/clef/octave filled in after the pass
  std::string voice;
  int unit = 0;
  int staff_number = 1;
};

struct Unit {
  std::string voice;
  std::vector<int> members;  // pending-note indices
};

class Reader {
 public:
  ParseResult run(const ptree& doc) {
    const ptree* root = nullptr;
    std::string root_name;
    for (const auto& [name, child] : doc) {
      if (is_markup(name)) continue;
      if (root) throw Error(ErrorCode::kMalformedXml, "multiple root elements");
      root = &child;
      root_name = name;
    }
    if (!root) throw Error(ErrorCode::kMalformedXml, "document has no root element");
    if (root_name != "score-partwise") unsupported(root_name, "(only score-partwise is read)");

    const ptree* part = nullptr;
    for (const auto& [name, child] : *root) {
      if (is_markup(name) || kIgnoredRoot.contains(name)) continue;
      if (name == "part-list") {
        check_part_list(child);
      } else if (name == "part") {
        if (part) unsupported("part", "(more than one part)");
        part = &child;
      } else {
        unsupported(name);
      }
    }
    if (!part) throw Error(ErrorCode::kMalformedXml, "score has no <part>");
    read_part(*part);
    return finish();
  }

 private:
  void check_part_list(const ptree& list) {
    int parts = 0;
    for (const auto& [name, child] : list) {
      if (is_markup(name) || name == "part-group") continue;
      if (name != "score-part") unsupported(name);
      ++parts;
    }
    if (parts != 1) unsupported("score-part", "(exactly one part is supported)");
  }

  void read_part(const ptree& part) {
    int index = 0;
    for (const auto& [name, child] : part) {
      if (is_markup(name)) continue;
      if (name != "measure") unsupported(name);
      read_measure(child, index++);
    }
    bar_count_ = index;
  }

  Tick current_bar_length() const {
    if (divisions_ <= 0) timing("measure content before <divisions>");
    return bar_length(ts_.numerator, ts_.denominator, divisions_);
  }

  void read_measure(const ptree& measure, int index) {
    cursor_ = 0;
    bar_index_ = index;
    bar_started_ = false;
    last_head_ = -1;
    last_was_grace_ = false;
    for (const auto& [name, child] : measure) {
      if (is_markup(name) || kIgnoredMeasure.contains(name)) continue;
      if (name == "attributes") {
        read_attributes(child);
      } else if (name == "note") {
        read_note(child);
      } else if (name == "backup" || name == "forward") {
        Tick d = duration_of(child, name);
        cursor_ += name == "backup" ? -d : d;
        if (cursor_ < 0) timing("bar " + std::to_string(index + 1) + ": <backup> before bar start");
        if (cursor_ > current_bar_length()) {
          timing("bar " + std::to_string(index + 1) + ": <forward> past bar end");
        }
        bar_started_ = true;
        last_head_ = -1;
      } else if (name == "direction") {
        read_direction(child);
      } else {
        unsupported(name);
      }
    }
    bar_onset_ += current_bar_length();
  }

  Tick duration_of(const ptree& node, std::string_view owner) {
    for (const auto& [name, child] : node) {
      if (is_markup(name)) continue;
      if (name == "duration") {
        const long long d = integer(child, "duration");
        if (d < 0) timing("negative duration");
        return d;
      }
      if (name != "voice" && name != "staff" && name != "footnote" && name != "level") {
        unsupported(name, "inside <" + std::string(owner) + ">");
      }
    }
    throw Error(ErrorCode::kMalformedXml, "<" + std::string(owner) + "> without <duration>");
  }

  Tick now() const { return bar_onset_ + cursor_; }

  void read_attributes(const ptree& attrs) {
    for (const auto& [name, child] : attrs) {
      if (is_markup(name) || kIgnoredAttributes.contains(name)) continue;
      if (name == "divisions") {
        const long long d = integer(child, "divisions");
        if (d <= 0) timing("non-positive <divisions>");
        if (divisions_ > 0 && d != divisions_) unsupported("divisions", "(changes are not supported)");
        divisions_ = static_cast<int>(d);
      } else if (name == "key") {
        read_key(child);
      } else if (name == "time") {
        read_time(child);
      } else if (name == "staves") {
        if (integer(child, "staves") > 2) unsupported("staves", "(at most two staves)");
      } else if (name == "clef") {
        read_clef(child);
      } else {
        unsupported(name);
      }
    }
  }

  void read_key(const ptree& key) {
    std::optional<int> fifths;
    for (const auto& [name, child] : key) {
      if (is_markup(name) || name == "cancel" || name == "mode" || name == "key-octave") continue;
      if (name != "fifths") unsupported(name, "(non-traditional key)");
      fifths = static_cast<int>(integer(child, "fifths"));
    }
    if (!fifths || *fifths < -7 || *fifths > 7) {
      throw Error(ErrorCode::kMalformedXml, "<key> needs <fifths> in -7..7");
    }
    keys_.push_back({now(), order_++, *fifths});
  }

  void read_time(const ptree& time) {
    if (bar_started_ || cursor_ != 0) timing("time signature change inside a bar");
    std::optional<int> beats, beat_type;
    for (const auto& [name, child] : time) {
      if (is_markup(name) || name == "interchangeable") continue;
      if (name == "beats") {
        const std::string t = text(child);
        if (t.find_first_not_of("0123456789") != std::string::npos) {
          unsupported("beats", "'" + t + "' (composite meters)");
        }
        beats = static_cast<int>(integer(child, "beats"));
      } else if (name == "beat-type") {
        beat_type = static_cast<int>(integer(child, "beat-type"));
      } else {
        unsupported(name);
      }
    }
    if (!beats || !beat_type) throw Error(ErrorCode::kMalformedXml, "<time> needs beats and beat-type");
    const TimeSignature ts{bar_index_, *beats, *beat_type};
    if (time_signatures_.empty() || time_signatures_.back().numerator != ts.numerator ||
        time_signatures_.back().denominator != ts.denominator) {
      time_signatures_.push_back(ts);
    }
    ts_ = ts;
  }

  void read_clef(const ptree& clef) {
    const int staff = std::stoi(attr(clef, "number").value_or("1"));
    if (staff < 1 || staff > 2) unsupported("clef", "on staff " + std::to_string(staff));
    std::string sign;
    for (const auto& [name, child] : clef) {
      if (is_markup(name) || name == "line" || name == "clef-octave-change") continue;
      if (name != "sign") unsupported(name, "inside <clef>");
      sign = text(child);
    }
    Clef c;
    if (sign == "G") {
      c = Clef::kG;
    } else if (sign == "F") {
      c = Clef::kF;
    } else if (sign == "C") {
      c = Clef::kC;
    } else {
      unsupported("clef", "sign '" + sign + "'");
    }
    clefs_[staff - 1].push_back({now(), order_++, static_cast<int>(c)});
  }

  void read_direction(const ptree& dir) {
    int staff = 1;
    Tick offset = 0;
    std::vector<std::pair<std::string, std::string>> shifts;  // type, size
    for (const auto& [name, child] : dir) {
      if (is_markup(name) || name == "sound" || name == "voice" || name == "footnote" ||
          name == "level" || name == "listening") {
        continue;
      }
      if (name == "staff") {
        staff = static_cast<int>(integer(child, "staff"));
      } else if (name == "offset") {
        offset = integer(child, "offset");
      } else if (name == "direction-type") {
        for (const auto& [tname, tchild] : child) {
          if (is_markup(tname) || kIgnoredDirectionType.contains(tname)) continue;
          if (tname != "octave-shift") unsupported(tname);
          shifts.emplace_back(attr(tchild, "type").value_or(""), attr(tchild, "size").value_or("8"));
        }
      } else {
        unsupported(name, "inside <direction>");
      }
    }
    if (staff < 1 || staff > 2) unsupported("direction", "on staff " + std::to_string(staff));
    for (const auto& [type, size] : shifts) {
      OctaveShift shift = OctaveShift::kNone;
      if (type == "continue") continue;
      if (type == "stop") {
        shift = OctaveShift::kNone;
      } else if (size == "8") {
        if (type == "down") {
          shift = OctaveShift::k8va;
        } else if (type == "up") {
          shift = OctaveShift::k8vb;
        } else {
          unsupported("octave-shift", "type '" + type + "'");
        }
      } else if (size == "15") {
        if (type == "down") {
          shift = OctaveShift::k15ma;
        } else if (type == "up") {
          shift = OctaveShift::k8vb;
          warnings_.push_back("15mb bracket at bar " + std::to_string(bar_index_ + 1) +
                              " read as 8vb");
          spdlog::warn("{}", warnings_.back());
        } else {
          unsupported("octave-shift", "type '" + type + "'");
        }
      } else {
        unsupported("octave-shift", "size " + size);
      }
      shifts_[staff - 1].push_back({now() + offset, order_++, static_cast<int>(shift)});
    }
  }

  void read_note(const ptree& note) {
    bool chord = false, grace = false, rest = false;
    std::optional<int> step;
    double alter = 0.0;
    std::optional<int> octave;
    std::optional<Tick> duration;
    std::string voice = "1";
    std::optional<NoteType> type;
    int dots = 0;
    int tuplet = 1;
    Stem stem = Stem::kNone;
    int staff = 1;
    for (const auto& [name, child] : note) {
      if (is_markup(name) || kIgnoredNote.contains(name)) continue;
      if (name == "chord") {
        chord = true;
      } else if (name == "grace") {
        grace = true;
      } else if (name == "rest") {
        rest = true;
      } else if (name == "pitch") {
        for (const auto& [pname, pchild] : child) {
          if (is_markup(pname)) continue;
          if (pname == "step") {
            const std::string s = text(pchild);
            step = s.size() == 1 ? step_from_letter(s[0]) : std::nullopt;
            if (!step) throw Error(ErrorCode::kMalformedXml, "bad <step> '" + s + "'");
          } else if (pname == "alter") {
            try {
              alter = std::stod(text(pchild));
            } catch (const std::exception&) {
              throw Error(ErrorCode::kMalformedXml, "bad <alter>");
            }
          } else if (pname == "octave") {
            octave = static_cast<int>(integer(pchild, "octave"));
          } else {
            unsupported(pname, "inside <pitch>");
          }
        }
      } else if (name == "duration") {
        duration = integer(child, "duration");
      } else if (name == "voice") {
        voice = text(child);
      } else if (name == "type") {
        type = note_type_from_name(text(child));
        if (!type) unsupported("type", "'" + text(child) + "'");
      } else if (name == "dot") {
        ++dots;
      } else if (name == "time-modification") {
        tuplet = read_time_modification(child);
      } else if (name == "stem") {
        const std::string s = text(child);
        if (s == "up") {
          stem = Stem::kUp;
        } else if (s == "down") {
          stem = Stem::kDown;
        } else if (s == "none") {
          stem = Stem::kNone;
        } else {
          unsupported("stem", "'" + s + "'");
        }
      } else if (name == "staff") {
        staff = static_cast<int>(integer(child, "staff"));
      } else {
        unsupported(name, "inside <note>");
      }
    }
    if (grace) {
      ++dropped_grace_;
      last_was_grace_ = true;
      return;
    }
    if (chord && last_was_grace_) {
      ++dropped_grace_;
      return;
    }
    last_was_grace_ = false;
    if (staff < 1 || staff > 2) unsupported("staff", std::to_string(staff));
    if (!duration) throw Error(ErrorCode::kMalformedXml, "<note> without <duration>");
    if (*duration <= 0) timing("non-positive note duration");
    if (dots > kMaxDots) unsupported("dot", "(more than three dots)");
    bar_started_ = true;
    const std::string where = "bar " + std::to_string(bar_index_ + 1);
    if (rest) {
      if (chord) timing(where + ": rest marked as chord");
      cursor_ += *duration;
      last_head_ = -1;
      return;
    }
    if (!step || !octave) throw Error(ErrorCode::kMalformedXml, "<pitch> needs step and octave");
    if (alter != std::floor(alter) || std::abs(alter) > 2) {
      unsupported("alter", "(microtones and triple accidentals)");
    }
    if (!type) {
      type = infer_type(*duration, tuplet, dots);
      if (!type) {
        throw Error(ErrorCode::kUnrepresentableDuration,
                    where + ": duration " + std::to_string(*duration) + " has no note type");
      }
    }
    PendingNote p;
    p.labels.spelling = Spelling{*step, static_cast<int>(alter)};
    p.raw.midi_pitch = 12 * (*octave + 1) + natural_pitch_class(*step) + static_cast<int>(alter);
    p.raw.duration_div = *duration;
    p.labels.staff = staff == 1 ? Staff::kUpper : Staff::kLower;
    p.labels.stem = stem;
    p.labels.note_type = *type;
    p.labels.dots = dots;
    p.labels.tuplet = tuplet;
    p.staff_number = staff;
    if (chord) {
      if (last_head_ < 0) timing(where + ": <chord/> without a preceding note");
      const PendingNote& head = notes_[last_head_];
      if (head.raw.duration_div != *duration) timing(where + ": chord notes differ in duration");
      if (head.staff_number != staff) unsupported("chord", "spanning both staves at " + where);
      p.raw.onset_div = head.raw.onset_div;
      p.voice = head.voice;
      p.unit = head.unit;
    } else {
      if (cursor_ >= current_bar_length()) timing(where + ": note starts after the bar end");
      p.raw.onset_div = now();
      p.voice = voice;
      p.unit = static_cast<int>(units_.size());
      units_.push_back({voice, {}});
      last_head_ = static_cast<int>(notes_.size());
      cursor_ += *duration;
    }
    units_[p.unit].members.push_back(static_cast<int>(notes_.size()));
    notes_.push_back(std::move(p));
  }

  int read_time_modification(const ptree& tm) {
    std::optional<long long> actual, normal;
    for (const auto& [name, child] : tm) {
      if (is_markup(name) || name == "normal-type" || name == "normal-dot") continue;
      if (name == "actual-notes") {
        actual = integer(child, "actual-notes");
      } else if (name == "normal-notes") {
        normal = integer(child, "normal-notes");
      } else {
        unsupported(name, "inside <time-modification>");
      }
    }
    if (!actual || !normal) throw Error(ErrorCode::kMalformedXml, "incomplete <time-modification>");
    if ((*actual != 3 && *actual != 5) || tuplet_normal_notes(static_cast<int>(*actual)) != *normal) {
      unsupported("time-modification",
                  std::to_string(*actual) + ":" + std::to_string(*normal) + " (only 3:2 and 5:4)");
    }
    return static_cast<int>(*actual);
  }

  std::optional<NoteType> infer_type(Tick duration, int tuplet, int& dots) const {
    for (int d = 0; d <= kMaxDots; ++d) {
      for (int t = 0; t < kNumNoteTypes; ++t) {
        const auto len = symbolic_length(static_cast<NoteType>(t), d, tuplet, divisions_);
        if (len && *len == duration) {
          dots = d;
          return static_cast<NoteType>(t);
        }
      }
    }
    return std::nullopt;
  }

  ParseResult finish() {
    if (divisions_ <= 0) timing("score has no <divisions>");
    // Keep only actual meter changes, starting from the implicit 4/4.
    std::vector<TimeSignature> meters = {TimeSignature{0, 4, 4}};
    for (const auto& ts : time_signatures_) {
      if (ts.bar_index == 0) {
        meters[0] = ts;
      } else if (ts.numerator != meters.back().numerator ||
                 ts.denominator != meters.back().denominator) {
        meters.push_back(ts);
      }
    }
    std::vector<RawNote> raw;
    raw.reserve(notes_.size());
    for (const auto& p : notes_) raw.push_back(p.raw);
    ScoreBuildResult built = build_score(divisions_, meters, raw, bar_count_);
    ParseResult result;
    result.score = std::move(built.score);
    result.clipped_notes = built.clipped_notes;
    result.dropped_grace = dropped_grace_;
    result.warnings = std::move(warnings_);
    if (result.score.bar_count != bar_count_) timing("notes extend past the last measure");

    const auto& ids = built.id_of_input;
    const auto& qnotes = result.score.notes;  // indexed by id
    LabelSet labels;
    labels.notes.resize(qnotes.size());
    for (std::size_t i = 0; i < notes_.size(); ++i) {
      const int id = ids[i];
      NoteLabels l = notes_[i].labels;
      const Tick t = qnotes[id].onset_div;
      const int s = static_cast<int>(l.staff);
      l.key_fifths = value_at(keys_, t, 0);
      l.clef = static_cast<Clef>(value_at(clefs_[s], t, s == 0 ? 0 : 1));
      l.octave_shift = static_cast<OctaveShift>(value_at(shifts_[s], t, 0));
      labels.notes[id] = l;
    }

    // Chord edges: every member pair of a unit.
    for (const auto& u : units_) {
      for (std::size_t a = 0; a < u.members.size(); ++a) {
        for (std::size_t b = a + 1; b < u.members.size(); ++b) {
          const int x = ids[u.members[a]], y = ids[u.members[b]];
          labels.chord_edges.emplace_back(std::min(x, y), std::max(x, y));
        }
      }
    }
    // Voice edges: consecutive units within a voice, unless a whole bar
    // separates them.
    std::map<std::string, std::vector<int>> by_voice;
    for (std::size_t u = 0; u < units_.size(); ++u) by_voice[units_[u].voice].push_back(static_cast<int>(u));
    for (auto& [voice, list] : by_voice) {
      auto head = [&](int u) -> const QuantizedNote& { return qnotes[ids[units_[u].members[0]]]; };
      std::stable_sort(list.begin(), list.end(),
                       [&](int a, int b) { return head(a).onset_div < head(b).onset_div; });
      for (std::size_t k = 1; k < list.size(); ++k) {
        const QuantizedNote& prev = head(list[k - 1]);
        const QuantizedNote& next = head(list[k]);
        if (prev.offset_div() > next.onset_div) {
          timing("voice " + voice + " overlaps itself in bar " + std::to_string(next.bar_index + 1));
        }
        if (next.bar_index > prev.bar_index + 1) continue;
        for (int a : units_[list[k - 1]].members) {
          for (int b : units_[list[k]].members) labels.voice_edges.emplace_back(ids[a], ids[b]);
        }
      }
    }
    std::sort(labels.voice_edges.begin(), labels.voice_edges.end());
    std::sort(labels.chord_edges.begin(), labels.chord_edges.end());
    result.score.labels = std::move(labels);
    validate_score(result.score);
    return result;
  }

  int divisions_ = 0;
  TimeSignature ts_{0, 4, 4};
  std::vector<TimeSignature> time_signatures_;
  int bar_count_ = 0;
  int bar_index_ = 0;
  Tick bar_onset_ = 0;
  Tick cursor_ = 0;
  bool bar_started_ = false;
  int last_head_ = -1;
  bool last_was_grace_ = false;
  int order_ = 0;
  int dropped_grace_ = 0;
  std::vector<std::string> warnings_;
  std::vector<PendingNote> notes_;
  std::vector<Unit> units_;
  std::vector<Marker> keys_;
  std::array<std::vector<Marker>, 2> clefs_;
  std::array<std::vector<Marker>, 2> shifts_;
};

}  // namespace

ParseResult parse_musicxml(std::string_view bytes) {
  const std::string xml = decompress_score_bytes(bytes);
  ptree doc;
  std::istringstream in(xml);
  try {
    boost::property_tree::read_xml(in, doc);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw Error(ErrorCode::kMalformedXml, e.what());
  }
  return Reader().run(doc);
}

ParseResult read_musicxml_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingInput, "cannot read " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_musicxml(bytes);
}

}  // namespace engrave
