#pragma once

// MusicXML 3.1 partwise subset: one piano part on two staves.

#include <string>
#include <string_view>
#include <vector>

#include "engrave/core.h"
#include "engrave/engraved.h"

namespace engrave {

struct ParseResult {
  Score score;  // labels always populated
  int dropped_grace = 0;
  int clipped_notes = 0;
  std::vector<std::string> warnings;
};

// Accepts plain XML, gzip, or a zipped .mxl container. Throws MalformedXml,
// UnsupportedElement, InconsistentTiming, UnrepresentableDuration.
ParseResult parse_musicxml(std::string_view bytes);
ParseResult read_musicxml_file(const std::string& path);

// Canonical serialization. Throws UnrepresentableDuration.
std::string export_musicxml(const EngravedScore& engraved);

// Structural check of an exported document against the element subset of
// the MusicXML 3.1 schema used here. Returns one message per problem.
std::vector<std::string> validate_musicxml(std::string_view xml);

// Voice number written for a slot on a staff: upper 1-4, lower 5-8, then
// alternating 9, 10, ... beyond four voices per staff.
int voice_number(Staff staff, int slot);

}  // namespace engrave
