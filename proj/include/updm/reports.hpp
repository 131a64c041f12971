#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "updm/evaluation.hpp"
#include "updm/restoration.hpp"

namespace updm {

// Deterministic text emitters. CSV is RFC-4180 style with LF endings; numbers
// use shortest-round-trip formatting so a re-parse reproduces exact values.
// SVG output is static 1.1 markup, no scripts.

std::string format_double(double v);

std::string matrix_to_csv(const TransferMatrix& m);
std::string matrix_to_json(const TransferMatrix& m);
TransferMatrix matrix_from_csv(const std::string& text);

std::string atlas_to_csv(const AtlasReport& a);
std::string atlas_to_json(const AtlasReport& a);
std::string atlas_to_svg(const AtlasReport& a);

std::string ablation_to_csv(const AblationTrace& t);
std::string ablation_to_json(const AblationTrace& t);
std::string ablation_to_svg(const AblationTrace& t);

std::string candidates_to_csv(const CandidateSet& v);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace updm
