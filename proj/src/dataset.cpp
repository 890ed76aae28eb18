#include "azarnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "azarnet/errors.hpp"
#include "azarnet/model.hpp"
#include "azarnet/rng.hpp"

namespace azarnet {

namespace fs = std::filesystem;

int class_index(const std::string& label) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == label) return static_cast<int>(i);
  }
  throw ValidationError("unknown class label '" + label + "'");
}

std::vector<ManifestRecord> parse_manifest(const std::string& text, const std::string& source) {
  std::vector<ManifestRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("path") || !j.contains("label") || !j["path"].is_string() ||
        !j["label"].is_string()) {
      throw ParseError(where + ": record needs string fields \"path\" and \"label\"");
    }
    ManifestRecord r;
    r.path = j["path"].get<std::string>();
    r.label = j["label"].get<std::string>();
    try {
      class_index(r.label);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (j.contains("split") && !j["split"].is_null()) {
      if (!j["split"].is_string()) throw ParseError(where + ": \"split\" must be a string");
      r.split = j["split"].get<std::string>();
      if (*r.split != "train" && *r.split != "test") {
        throw ValidationError(where + ": split must be \"train\" or \"test\", got '" + *r.split + "'");
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<ManifestRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path);
}

std::string manifest_to_jsonl(const std::vector<ManifestRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["path"] = r.path;
    j["label"] = r.label;
    if (r.split) j["split"] = *r.split;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << manifest_to_jsonl(records);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string resolve_record_path(const std::string& manifest_path, const ManifestRecord& record) {
  const fs::path p(record.path);
  if (p.is_absolute()) return p.string();
  return (fs::path(manifest_path).parent_path() / p).lexically_normal().string();
}

// ---- synthetic modes ----

const std::array<std::array<double, 7>, 7>& synth_scales() {
  // Six of the 22 semitones within two octaves (octave excluded) per class,
  // chosen so that any two classes share at most two of them.
  static const std::array<std::array<double, 7>, 7> scales = {{
      {0, 800, 1100, 1600, 1700, 1900, 2300},
      {0, 700, 1300, 1500, 1700, 1900, 2200},
      {0, 600, 900, 1000, 1100, 1800, 2100},
      {0, 200, 400, 500, 600, 700, 900},
      {0, 100, 600, 1300, 2000, 2100, 2200},
      {0, 100, 300, 400, 1000, 1400, 1500},
      {0, 300, 400, 500, 800, 1800, 2300},
  }};
  return scales;
}

AudioClip synth_clip(const SynthSpec& spec) {
  if (spec.class_id < 0 || spec.class_id >= static_cast<int>(synth_scales().size())) {
    throw ValidationError("synth class id out of range: " + std::to_string(spec.class_id));
  }
  // Walk positions 0..7 index the seven degrees plus the octave, ascending.
  std::array<double, 8> pitches{};
  const auto& scale = synth_scales()[static_cast<std::size_t>(spec.class_id)];
  std::copy(scale.begin(), scale.end(), pitches.begin());
  pitches[7] = 1200.0;
  std::sort(pitches.begin(), pitches.end());
  const auto total = static_cast<std::size_t>(std::llround(spec.duration_seconds * spec.sample_rate));
  const auto note_len = static_cast<std::size_t>(std::llround(spec.sample_rate / spec.notes_per_second));
  const auto fade = static_cast<std::size_t>(std::llround(0.010 * spec.sample_rate));
  constexpr double kHarmonics[3] = {1.0, 0.5, 0.25};
  constexpr double kJitter = 0.1;
  const double gain = kSynthPeak / ((kHarmonics[0] + kHarmonics[1] + kHarmonics[2]) * (1.0 + kJitter));

  Rng rng(spec.seed);
  int degree = static_cast<int>(rng.below(8));

  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.assign(total, 0.0f);
  for (std::size_t start = 0; start < total; start += note_len) {
    const double cents = pitches[static_cast<std::size_t>(degree)];
    const double f0 = spec.tonic_hz * std::pow(2.0, cents / 1200.0);
    const double amp = gain * (1.0 + kJitter * (2.0 * rng.uniform() - 1.0));
    const std::size_t len = std::min(note_len, total - start);
    for (std::size_t i = 0; i < len; ++i) {
      const double t = static_cast<double>(i) / spec.sample_rate;
      double v = 0.0;
      for (int h = 0; h < 3; ++h) v += kHarmonics[h] * std::sin(2.0 * std::numbers::pi * f0 * (h + 1) * t);
      double env = 1.0;
      if (i < fade) env = static_cast<double>(i) / fade;
      if (len - 1 - i < fade) env = std::min(env, static_cast<double>(len - 1 - i) / fade);
      clip.samples[start + i] = std::clamp(static_cast<float>(amp * env * v), -kSynthPeak, kSynthPeak);
    }
    static constexpr int kSteps[5] = {-2, -1, 0, 1, 2};
    degree += kSteps[rng.below(5)];
    if (degree < 0) degree = -degree;
    if (degree > 7) degree = 14 - degree;
  }
  return clip;
}

std::uint64_t derive_clip_seed(std::uint64_t base_seed, int class_id, std::size_t index) {
  return base_seed ^ splitmix64((static_cast<std::uint64_t>(class_id) << 32) | static_cast<std::uint64_t>(index));
}

std::string generate_dataset(std::size_t n_per_class, std::uint64_t base_seed, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw IoError("cannot create output directory '" + out_dir + "'" + (ec ? ": " + ec.message() : ""));
  }
  std::vector<ManifestRecord> records;
  for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      SynthSpec spec;
      spec.class_id = c;
      spec.seed = derive_clip_seed(base_seed, c, i);
      char name[64];
      std::snprintf(name, sizeof name, "%s_%03zu.wav", std::string(kClassNames[c]).c_str(), i);
      write_wav((fs::path(out_dir) / name).string(), synth_clip(spec));
      records.push_back({name, std::string(kClassNames[c]), std::nullopt});
    }
  }
  const std::string manifest = (fs::path(out_dir) / "manifest.jsonl").string();
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace azarnet
