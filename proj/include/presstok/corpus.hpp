#pragma once

#include "presstok/common.hpp"

#include <array>
#include <string>
#include <vector>

namespace presstok::corpus {

// Five body categories; light male/female behave near-identically on a
// pressure mat and are merged.
enum class BodyCategory : int {
  kHeavyTallMale = 0,
  kMediumTallMale = 1,
  kHeavyTallFemale = 2,
  kMediumTallFemale = 3,
  kLightShort = 4,
};
constexpr int kBodyCategoryCount = 5;

const char* body_category_name(BodyCategory c);

struct CategoryBounds {
  double mass_lo, mass_hi;      // kg, half-open [lo, hi)
  double height_lo, height_hi;  // cm, [lo, hi)
};
CategoryBounds category_bounds(BodyCategory c);

struct BodyProfile {
  double mass_kg = 70.0;
  double height_cm = 175.0;
  BodyCategory category = BodyCategory::kMediumTallMale;
  int64_t profile_seed = 0;
};

// Uniform category, then (mass, height) uniform inside the category box.
BodyProfile sample_body_profile(int64_t seed);

enum class PrimitiveKind : int {
  kStand = 0,
  kSit = 1,
  kLie = 2,
  kJump = 3,
  kStepLeft = 4,
  kStepRight = 5,
  kBend = 6,
  kSpreadLegs = 7,
  kArmsRaise = 8,
};
constexpr int kPrimitiveKindCount = 9;

const char* primitive_kind_name(PrimitiveKind k);

enum class Pace : int { kSlow = 0, kNormal = 1, kFast = 2 };

struct MotionPrimitive {
  PrimitiveKind kind = PrimitiveKind::kStand;
  double duration_s = 2.0;
  Pace pace = Pace::kNormal;
};

struct MotionScript {
  std::vector<MotionPrimitive> primitives;

  double total_duration() const {
    double t = 0;
    for (const auto& p : primitives) t += p.duration_s;
    return t;
  }
  // Activity class = dominant primitive kind by total duration,
  // earliest on ties.
  PrimitiveKind dominant_kind() const;
};

// Deterministic Gaussian-blob renderer. Blob mass integrals are linear in
// body mass, blob geometry scales with height, pace drives trajectory
// speed. Output is normalized by a fixed full-scale constant (the peak
// cell pressure of a 100 kg reference-height two-foot stand) and clamped
// to [0, 1]. The _raw variant skips normalization and clamping.
PressureDynamics render_pressure(const MotionScript& script, const BodyProfile& profile,
                                 int rows, int cols, float rate_hz);
PressureDynamics render_pressure_raw(const MotionScript& script, const BodyProfile& profile,
                                     int rows, int cols, float rate_hz);
double full_scale_pressure();

// Template-based description. variant_seed enumerates surface forms
// (template choice, subject form, pace adverb, connectives) in mixed
// radix, so variant 0 is the canonical form and nearby variants differ.
std::string render_text(const MotionScript& script, const BodyProfile& profile,
                        int64_t variant_seed);

enum class Split : int { kTrain = 0, kVal = 1, kTest = 2 };
const char* split_name(Split s);

struct PairedSample {
  int64_t id = 0;
  Split split = Split::kTrain;
  PrimitiveKind label = PrimitiveKind::kStand;
  std::string text;
  BodyProfile profile;
  MotionScript script;
  int64_t variant_seed = 0;
  std::string path;  // relative .prsd path
};

struct CorpusConfig {
  int size = 2000;       // paired samples
  int variants = 5;      // body variants per script
  int64_t seed = 1;
  int rows = 80;
  int cols = 28;
  float rate_hz = 30.0f;
  std::string config_hash;  // embedded in the manifest header
};

// Samples a script deterministically; used by corpus building and tests.
MotionScript sample_script(Rng& rng);

// "kind:duration:pace,..." round-trip, used in the manifest.
std::string script_to_string(const MotionScript& script);
MotionScript script_from_string(const std::string& spec);
const char* pace_name(Pace p);

// Generates size samples (ceil(size/variants) scripts x variants body
// profiles), renders text and pressure, splits 80/5/15 with pairwise
// disjoint description sets, and writes manifest.tsv plus one .prsd per
// sample under out_dir. Returns the samples in manifest order.
std::vector<PairedSample> build_corpus(const CorpusConfig& config, const std::string& out_dir);

// Manifest access for downstream consumers.
std::vector<PairedSample> load_manifest(const std::string& dir);
PressureDynamics load_sample(const std::string& dir, const PairedSample& sample);

}  // namespace presstok::corpus
