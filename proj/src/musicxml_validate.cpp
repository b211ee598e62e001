#include <map>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "engrave/musicxml.h"

namespace engrave {
namespace {

using boost::property_tree::ptree;

bool is_markup(const std::string& name) { return name == "<xmlattr>" || name == "<xmlcomment>"; }

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::optional<long long> as_int(const ptree& node) {
  const std::string t = trimmed(node.data());
  if (t.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const long long v = std::stoll(t, &used);
    if (used == t.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

std::string attribute(const ptree& node, const std::string& name) {
  if (auto a = node.get_child_optional("<xmlattr>." + name)) return trimmed(a->data());
  return {};
}

class Validator {
 public:
  std::vector<std::string> run(std::string_view xml) {
    ptree doc;
    std::istringstream in{std::string(xml)};
    try {
      boost::property_tree::read_xml(in, doc);
    } catch (const boost::property_tree::xml_parser_error& e) {
      return {std::string("not well-formed: ") + e.what()};
    }
    auto root = doc.get_child_optional("score-partwise");
    if (!root) return {"root element must be <score-partwise>"};
    if (attribute(*root, "version") != "3.1") problem("score-partwise version must be 3.1");

    std::set<std::string> part_ids;
    std::vector<std::string> top;
    for (const auto& [name, child] : *root) {
      if (is_markup(name)) continue;
      top.push_back(name);
      if (name == "part-list") {
        for (const auto& [pname, pchild] : child) {
          if (is_markup(pname)) continue;
          if (pname != "score-part") {
            problem("unexpected <" + pname + "> in <part-list>");
            continue;
          }
          const std::string id = attribute(pchild, "id");
          if (id.empty()) problem("<score-part> without id");
          if (!pchild.get_child_optional("part-name")) problem("<score-part> without <part-name>");
          part_ids.insert(id);
        }
      } else if (name == "part") {
        if (!part_ids.contains(attribute(child, "id"))) problem("<part> id not declared in <part-list>");
        check_part(child);
      } else {
        problem("unexpected <" + name + "> under <score-partwise>");
      }
    }
    if (top.empty() || top.front() != "part-list") problem("<part-list> must come first");
    return problems_;
  }

 private:
  void problem(const std::string& msg) { problems_.push_back(msg); }

  void check_part(const ptree& part) {
    int expected = 1;
    for (const auto& [name, child] : part) {
      if (is_markup(name)) continue;
      if (name != "measure") {
        problem("unexpected <" + name + "> in <part>");
        continue;
      }
      const std::string number = attribute(child, "number");
      where_ = "measure " + number;
      if (number != std::to_string(expected)) problem(where_ + ": expected number " + std::to_string(expected));
      ++expected;
      check_measure(child);
    }
    if (expected == 1) problem("<part> has no measures");
  }

  void check_measure(const ptree& measure) {
    Tick cursor = 0, last_onset = 0;
    std::map<std::string, Tick> voice_time;
    bool measure_started = false;
    for (const auto& [name, child] : measure) {
      if (is_markup(name)) continue;
      if (name == "attributes") {
        check_attributes(child, measure_started);
      } else if (name == "note") {
        measure_started = true;
        const Tick d = check_note(child);
        const bool chord = child.get_child_optional("chord").has_value();
        const std::string voice = trimmed(child.get("voice", "1"));
        if (chord) {
          cursor = last_onset + d;
        } else {
          last_onset = cursor;
          cursor += d;
          voice_time[voice] += d;
        }
      } else if (name == "backup" || name == "forward") {
        measure_started = true;
        auto d = child.get_child_optional("duration");
        auto v = d ? as_int(*d) : std::nullopt;
        if (!v || *v <= 0) {
          problem(where_ + ": <" + name + "> needs a positive <duration>");
          continue;
        }
        cursor += name == "backup" ? -*v : *v;
      } else if (name == "direction") {
        check_direction(child);
      } else {
        problem(where_ + ": unexpected <" + name + ">");
      }
      if (cursor < 0 || (bar_length_ > 0 && cursor > bar_length_)) {
        problem(where_ + ": time cursor leaves the measure");
      }
    }
    for (const auto& [voice, total] : voice_time) {
      if (total != bar_length_) {
        problem(where_ + ": voice " + voice + " sums to " + std::to_string(total) + " of " +
                std::to_string(bar_length_));
      }
    }
  }

  void check_order(const ptree& node, const std::vector<std::string>& order, const std::string& owner) {
    std::size_t pos = 0;
    for (const auto& [name, child] : node) {
      if (is_markup(name)) continue;
      std::size_t k = pos;
      while (k < order.size() && order[k] != name) ++k;
      if (k == order.size()) {
        const bool known = std::find(order.begin(), order.end(), name) != order.end();
        problem(where_ + ": <" + name + "> " + (known ? "out of order" : "not allowed") + " in <" +
                owner + ">");
        continue;
      }
      pos = k;
    }
  }

  void check_attributes(const ptree& attrs, bool started) {
    check_order(attrs, {"divisions", "key", "time", "staves", "clef"}, "attributes");
    for (const auto& [name, child] : attrs) {
      if (name == "divisions") {
        auto v = as_int(child);
        if (!v || *v <= 0) problem(where_ + ": bad <divisions>");
        else divisions_ = *v;
      } else if (name == "key") {
        check_order(child, {"fifths"}, "key");
        auto f = child.get_child_optional("fifths");
        auto v = f ? as_int(*f) : std::nullopt;
        if (!v || *v < -7 || *v > 7) problem(where_ + ": <fifths> must be in -7..7");
      } else if (name == "time") {
        if (started) problem(where_ + ": <time> after measure content");
        check_order(child, {"beats", "beat-type"}, "time");
        auto b = child.get_child_optional("beats");
        auto t = child.get_child_optional("beat-type");
        auto bv = b ? as_int(*b) : std::nullopt;
        auto tv = t ? as_int(*t) : std::nullopt;
        if (!bv || !tv || *bv <= 0 || *tv <= 0) {
          problem(where_ + ": bad <time>");
        } else {
          beats_ = *bv;
          beat_type_ = *tv;
        }
      } else if (name == "staves") {
        auto v = as_int(child);
        if (!v || *v < 1) problem(where_ + ": bad <staves>");
      } else if (name == "clef") {
        check_order(child, {"sign", "line"}, "clef");
        const std::string sign = trimmed(child.get("sign", ""));
        if (sign != "G" && sign != "F" && sign != "C") problem(where_ + ": bad clef sign '" + sign + "'");
        auto line = child.get_child_optional("line");
        auto lv = line ? as_int(*line) : std::nullopt;
        if (line && (!lv || *lv < 1 || *lv > 5)) problem(where_ + ": clef line must be 1..5");
        const std::string number = attribute(child, "number");
        if (!number.empty() && number != "1" && number != "2") problem(where_ + ": clef on unknown staff");
      }
    }
    if (divisions_ > 0 && beat_type_ > 0) bar_length_ = beats_ * 4 * divisions_ / beat_type_;
  }

  Tick check_note(const ptree& note) {
    check_order(note, {"chord", "pitch", "rest", "duration", "voice", "type", "dot",
                       "time-modification", "stem", "staff", "notations"},
                "note");
    const bool pitch = note.get_child_optional("pitch").has_value();
    const bool rest = note.get_child_optional("rest").has_value();
    if (pitch == rest) problem(where_ + ": <note> needs exactly one of <pitch>, <rest>");
    if (pitch) {
      const ptree& p = note.get_child("pitch");
      check_order(p, {"step", "alter", "octave"}, "pitch");
      const std::string step = trimmed(p.get("step", ""));
      if (step.size() != 1 || step[0] < 'A' || step[0] > 'G') problem(where_ + ": bad <step>");
      if (auto a = p.get_child_optional("alter")) {
        auto v = as_int(*a);
        if (!v || *v < -2 || *v > 2) problem(where_ + ": bad <alter>");
      }
      auto o = p.get_child_optional("octave");
      auto ov = o ? as_int(*o) : std::nullopt;
      if (!ov || *ov < 0 || *ov > 9) problem(where_ + ": <octave> must be 0..9");
    }
    if (rest) {
      const std::string m = attribute(note.get_child("rest"), "measure");
      if (!m.empty() && m != "yes" && m != "no") problem(where_ + ": bad rest measure flag");
    }
    if (auto t = note.get_child_optional("type")) {
      if (!note_type_from_name(trimmed(t->data()))) problem(where_ + ": bad <type>");
    }
    if (auto s = note.get_child_optional("stem")) {
      const std::string v = trimmed(s->data());
      if (v != "up" && v != "down" && v != "none" && v != "double") problem(where_ + ": bad <stem>");
    }
    if (auto s = note.get_child_optional("staff")) {
      auto v = as_int(*s);
      if (!v || *v < 1) problem(where_ + ": bad <staff>");
    }
    if (auto tm = note.get_child_optional("time-modification")) {
      check_order(*tm, {"actual-notes", "normal-notes"}, "time-modification");
      auto a = tm->get_child_optional("actual-notes");
      auto n = tm->get_child_optional("normal-notes");
      auto av = a ? as_int(*a) : std::nullopt;
      auto nv = n ? as_int(*n) : std::nullopt;
      if (!av || !nv || *av <= 0 || *nv <= 0) problem(where_ + ": bad <time-modification>");
    }
    if (auto nt = note.get_child_optional("notations")) {
      for (const auto& [name, child] : *nt) {
        if (is_markup(name)) continue;
        if (name != "tuplet") {
          problem(where_ + ": <" + name + "> not allowed in <notations>");
          continue;
        }
        const std::string type = attribute(child, "type");
        if (type != "start" && type != "stop") problem(where_ + ": bad tuplet type");
      }
    }
    auto d = note.get_child_optional("duration");
    auto dv = d ? as_int(*d) : std::nullopt;
    if (!dv || *dv <= 0) {
      problem(where_ + ": <note> needs a positive <duration>");
      return 0;
    }
    return *dv;
  }

  void check_direction(const ptree& dir) {
    check_order(dir, {"direction-type", "staff"}, "direction");
    const std::string placement = attribute(dir, "placement");
    if (!placement.empty() && placement != "above" && placement != "below") {
      problem(where_ + ": bad placement");
    }
    int types = 0;
    for (const auto& [name, child] : dir) {
      if (name != "direction-type") continue;
      ++types;
      for (const auto& [tname, tchild] : child) {
        if (is_markup(tname)) continue;
        if (tname != "octave-shift") {
          problem(where_ + ": <" + tname + "> not allowed in <direction-type>");
          continue;
        }
        const std::string type = attribute(tchild, "type");
        const std::string size = attribute(tchild, "size");
        if (type != "up" && type != "down" && type != "stop" && type != "continue") {
          problem(where_ + ": bad octave-shift type");
        }
        if (!size.empty() && size != "8" && size != "15") problem(where_ + ": bad octave-shift size");
      }
    }
    if (types == 0) problem(where_ + ": <direction> without <direction-type>");
  }

  std::vector<std::string> problems_;
  std::string where_;
  long long divisions_ = 0;
  long long beats_ = 4;
  long long beat_type_ = 4;
  Tick bar_length_ = 0;
};

}  // namespace

std::vector<std::string> validate_musicxml(std::string_view xml) { return Validator().run(xml); }

}  // namespace engrave
