#include "engrave/prediction_io.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "engrave/error.h"

namespace engrave {

using nlohmann::json;

void write_prediction_dump(const Score& score, const PredictionBundle& bundle, std::ostream& out) {
  if (bundle.note_count() != static_cast<int>(score.notes.size())) {
    throw Error(ErrorCode::kShapeMismatch, "bundle covers " + std::to_string(bundle.note_count()) +
                                               " notes, score has " +
                                               std::to_string(score.notes.size()));
  }
  json ts = json::array();
  for (const auto& t : score.time_signatures) ts.push_back({t.bar_index, t.numerator, t.denominator});
  out << json{{"record", "score"},
              {"divisions", score.divisions_per_quarter},
              {"time_signatures", ts},
              {"bar_count", score.bar_count},
              {"notes", score.notes.size()}}
             .dump()
      << '\n';
  for (const auto& n : score.notes) {
    json logits = json::object();
    for (NodeHead h : kAllNodeHeads) {
      const auto row = bundle.logits(h).row(n.id);
      logits[std::string(node_head_name(h))] = std::vector<double>(row.begin(), row.end());
    }
    out << json{{"record", "note"},     {"id", n.id},
                {"onset", n.onset_div}, {"duration", n.duration_div},
                {"pitch", n.midi_pitch}, {"logits", logits}}
               .dump()
        << '\n';
  }
  for (std::size_t i = 0; i < bundle.voice_pairs.size(); ++i) {
    out << json{{"record", "voice"},
                {"src", bundle.voice_pairs[i].first},
                {"dst", bundle.voice_pairs[i].second},
                {"p", bundle.voice_prob[i]}}
               .dump()
        << '\n';
  }
  for (std::size_t i = 0; i < bundle.chord_pairs.size(); ++i) {
    out << json{{"record", "chord"},
                {"src", bundle.chord_pairs[i].first},
                {"dst", bundle.chord_pairs[i].second},
                {"p", bundle.chord_prob[i]}}
               .dump()
        << '\n';
  }
}

std::string prediction_dump_string(const Score& score, const PredictionBundle& bundle) {
  std::ostringstream out;
  write_prediction_dump(score, bundle, out);
  return out.str();
}

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::kShapeMismatch, "dump: " + msg); }

}  // namespace

PredictionDump read_prediction_dump(std::istream& in) {
  std::optional<json> header;
  std::vector<json> notes;
  PredictionDump dump;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
      const std::string kind = rec.at("record").get<std::string>();
      if (kind == "score") {
        if (header) bad("second score record on line " + std::to_string(line_no));
        header = rec;
      } else if (kind == "note") {
        notes.push_back(std::move(rec));
      } else if (kind == "voice") {
        dump.bundle.voice_pairs.emplace_back(rec.at("src").get<int>(), rec.at("dst").get<int>());
        dump.bundle.voice_prob.push_back(rec.at("p").get<double>());
      } else if (kind == "chord") {
        dump.bundle.chord_pairs.emplace_back(rec.at("src").get<int>(), rec.at("dst").get<int>());
        dump.bundle.chord_prob.push_back(rec.at("p").get<double>());
      } else {
        bad("unknown record '" + kind + "' on line " + std::to_string(line_no));
      }
    } catch (const json::exception& e) {
      bad("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw Error(ErrorCode::kMissingInput, "dump: no score record");

  try {
    std::vector<TimeSignature> ts;
    for (const auto& t : header->at("time_signatures")) {
      ts.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    }
    const std::size_t count = header->at("notes").get<std::size_t>();
    if (notes.size() != count) bad("expected " + std::to_string(count) + " note records");
    std::vector<RawNote> raw(count);
    std::vector<bool> seen(count, false);
    for (const auto& rec : notes) {
      const int id = rec.at("id").get<int>();
      if (id < 0 || static_cast<std::size_t>(id) >= count || seen[id]) bad("bad note id " + std::to_string(id));
      seen[id] = true;
      raw[id] = {rec.at("onset").get<Tick>(), rec.at("duration").get<Tick>(), rec.at("pitch").get<int>()};
    }
    auto built = build_score(header->at("divisions").get<int>(), ts, raw, header->at("bar_count").get<int>());
    for (std::size_t i = 0; i < count; ++i) {
      if (built.id_of_input[i] != static_cast<int>(i)) bad("note ids are not in canonical order");
    }
    if (built.clipped_notes > 0 || built.score.bar_count != header->at("bar_count").get<int>()) {
      bad("notes do not fit the stored bars");
    }
    dump.score = std::move(built.score);
    for (NodeHead h : kAllNodeHeads) dump.bundle.logits(h) = ad::Matrix(static_cast<int>(count), head_width(h));
    for (const auto& rec : notes) {
      const int id = rec.at("id").get<int>();
      const auto& logits = rec.at("logits");
      for (NodeHead h : kAllNodeHeads) {
        const auto row = logits.at(std::string(node_head_name(h))).get<std::vector<double>>();
        if (static_cast<int>(row.size()) != head_width(h)) {
          bad("note " + std::to_string(id) + " head " + std::string(node_head_name(h)) + " width");
        }
        std::copy(row.begin(), row.end(), dump.bundle.logits(h).row(id).begin());
      }
    }
  } catch (const json::exception& e) {
    bad(e.what());
  }
  for (const auto& pairs : {dump.bundle.voice_pairs, dump.bundle.chord_pairs}) {
    for (const auto& [u, w] : pairs) {
      if (u < 0 || w < 0 || u >= dump.bundle.note_count() || w >= dump.bundle.note_count()) {
        bad("pair references unknown note");
      }
    }
  }
  return dump;
}

PredictionDump read_prediction_dump_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingInput, "cannot open " + path);
  return read_prediction_dump(in);
}

}  // namespace engrave
