#pragma once

#include <string>

#include "copho/diffusion.hpp"
#include "copho/neural.hpp"

namespace copho {

// Versioned binary container shared by the model and schedule formats:
// magic(8) | version u32 | payload length u64 | payload | FNV-1a-64 checksum.
// Loaders reject unknown magic, unsupported versions, truncation, trailing
// garbage, and checksum mismatches with FormatError; round-trips are
// bit-exact.

void save_model(const std::string& path, const MpnnModel& m);
MpnnModel load_model(const std::string& path);

/// Persists T, the class counts, and the beta sequence; loading rebuilds the
/// kernel stacks with schedule_from_betas, reproducing them bit for bit.
void save_schedule(const std::string& path, const NoiseSchedule& s);
NoiseSchedule load_schedule(const std::string& path);

/// Whole-file text helpers (FormatError on IO failure).
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace copho
