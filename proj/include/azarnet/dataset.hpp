#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "azarnet/audio.hpp"

namespace azarnet {

struct ManifestRecord {
  std::string path;
  std::string label;
  std::optional<std::string> split;  // "train" or "test"

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

// Index of a label in kClassNames; ValidationError for anything else.
int class_index(const std::string& label);

// One JSON object per line: {"path": ..., "label": ..., "split": ...}.
// Blank lines are skipped.
std::vector<ManifestRecord> parse_manifest(const std::string& text, const std::string& source = "<memory>");
std::vector<ManifestRecord> load_manifest(const std::string& path);
std::string manifest_to_jsonl(const std::vector<ManifestRecord>& records);
void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Relative record paths are resolved against the manifest's directory.
std::string resolve_record_path(const std::string& manifest_path, const ManifestRecord& record);

// Synthetic stand-in for the real corpus. Each class is a 7-degree interval
// pattern (cents above a fixed tonic, spanning two octaves); a clip is a
// seeded random walk over the class's degrees and the tonic's octave at
// 4 notes/s, each note a fundamental plus two harmonics. These are separable
// toy modes, not musicological models.
struct SynthSpec {
  int class_id = 0;
  std::uint64_t seed = 0;
  double duration_seconds = 16.0;
  int sample_rate = kSampleRate;
  double tonic_hz = 330.0;
  double notes_per_second = 4.0;
};

// Interval pattern of each class, in cents above the tonic.
const std::array<std::array<double, 7>, 7>& synth_scales();

inline constexpr float kSynthPeak = 0.9f;

AudioClip synth_clip(const SynthSpec& spec);

// base_seed ^ splitmix64((class_id << 32) | index).
std::uint64_t derive_clip_seed(std::uint64_t base_seed, int class_id, std::size_t index);

// Writes 7 * n_per_class WAV files and `manifest.jsonl` into out_dir;
// returns the manifest path.
std::string generate_dataset(std::size_t n_per_class, std::uint64_t base_seed, const std::string& out_dir);

}  // namespace azarnet
