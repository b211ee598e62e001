#pragma once

#include <string>
#include <string_view>

namespace engrave {

bool is_gzip(std::string_view bytes);
bool is_zip(std::string_view bytes);

std::string gunzip(std::string_view bytes);

// Reads the root score of a compressed MusicXML (.mxl) container: the file
// named by META-INF/container.xml, else the first .xml/.musicxml entry.
std::string read_mxl(std::string_view bytes);

// Returns XML text, unwrapping gzip or .mxl containers when present.
std::string decompress_score_bytes(std::string_view bytes);

}  // namespace engrave
