#pragma once

// JSON-lines prediction dump: one score record, one record per note with its
// logits, then one record per voice and chord candidate pair.

#include <iosfwd>
#include <string>

#include "engrave/core.h"
#include "engrave/decoders.h"

namespace engrave {

struct PredictionDump {
  Score score;  // labels are not stored
  PredictionBundle bundle;
};

void write_prediction_dump(const Score& score, const PredictionBundle& bundle, std::ostream& out);
std::string prediction_dump_string(const Score& score, const PredictionBundle& bundle);

// Throws ShapeMismatch on inconsistent records and
// MissingInput when the stream holds no score record.
PredictionDump read_prediction_dump(std::istream& in);
PredictionDump read_prediction_dump_file(const std::string& path);

}  // namespace engrave
