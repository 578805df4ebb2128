#include "presstok/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "presstok/tensorio.hpp"

namespace presstok::corpus {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Reference mat pitch (mm per cell) on the 80x28 / 560x1680 mm grid.
constexpr double kRowPitchMm = 21.0;
constexpr double kColPitchMm = 20.0;
constexpr double kMatHeightMm = 1680.0;
constexpr double kMatWidthMm = 560.0;
constexpr double kReferenceHeightCm = 180.0;

double pace_factor(Pace p) {
  switch (p) {
    case Pace::kSlow: return 1.8;
    case Pace::kFast: return 0.6;
    default: return 1.0;
  }
}

// Body geometry in mm, all proportional to standing height.
struct BodyGeom {
  double foot_len;    // along rows
  double foot_width;  // along cols
  double half_stance; // half distance between foot centers
  double sigma_r, sigma_c;         // foot blob
  double hip_sigma_r, hip_sigma_c; // seated hip blob
};

BodyGeom body_geom(double height_cm) {
  BodyGeom g;
  const double h_mm = height_cm * 10.0;
  g.foot_len = 0.152 * h_mm;
  g.foot_width = 0.055 * h_mm;
  g.half_stance = 0.055 * h_mm;
  g.sigma_r = g.foot_len / 4.0;
  g.sigma_c = g.foot_width / 2.2;
  g.hip_sigma_r = 0.07 * h_mm;
  g.hip_sigma_c = 0.10 * h_mm;
  return g;
}

struct Blob {
  double row_mm, col_mm;
  double sigma_r, sigma_c;
  double share;  // fraction of the (amplitude-scaled) body mass
};

// Amplitude such that the cell sum approximates share * mass (unit gain):
// integral of the Gaussian = a * 2*pi*sr*sc, cells have area pr*pc.
void splat(std::vector<float>& frame, int rows, int cols, const Blob& b, double mass,
           double amp_factor) {
  // The grid always covers the reference mat area, so pitch scales with dims.
  const double pr = kMatHeightMm / rows;
  const double pc = kMatWidthMm / cols;
  const double a =
      b.share * mass * amp_factor * pr * pc / (2.0 * kPi * b.sigma_r * b.sigma_c);
  const int r0 = std::max(0, static_cast<int>((b.row_mm - 4 * b.sigma_r) / pr));
  const int r1 = std::min(rows - 1, static_cast<int>((b.row_mm + 4 * b.sigma_r) / pr) + 1);
  const int c0 = std::max(0, static_cast<int>((b.col_mm - 4 * b.sigma_c) / pc));
  const int c1 = std::min(cols - 1, static_cast<int>((b.col_mm + 4 * b.sigma_c) / pc) + 1);
  for (int r = r0; r <= r1; ++r) {
    const double dr = (r + 0.5) * pr - b.row_mm;
    const double er = dr * dr / (2.0 * b.sigma_r * b.sigma_r);
    for (int c = c0; c <= c1; ++c) {
      const double dc = (c + 0.5) * pc - b.col_mm;
      frame[static_cast<size_t>(r) * cols + c] +=
          static_cast<float>(a * std::exp(-(er + dc * dc / (2.0 * b.sigma_c * b.sigma_c))));
    }
  }
}

// Smooth 0->1->0 bump over one unit interval.
double updown(double u) { return std::sin(kPi * std::clamp(u, 0.0, 1.0)); }

// Emits the contact blobs of one primitive at local phase u in [0,1).
// amp_factor scales all blob amplitudes (impact loading).
void primitive_blobs(const MotionPrimitive& prim, const BodyGeom& g, double u,
                     std::vector<Blob>& out, double& amp_factor) {
  amp_factor = 1.0;
  const double cr = kMatHeightMm / 2.0;
  const double cc = kMatWidthMm / 2.0;
  const double pace = pace_factor(prim.pace);
  // Trajectory speed rises with pace; slow pace also means longer
  // durations, so cycle counts stay close to proportional to duration.
  const double cycles =
      std::max(1.0, std::round(prim.duration_s * 0.8 / pace));

  auto feet = [&](double row_shift, double col_shift, double half_sep, double wl, double wr) {
    out.push_back({cr + row_shift, cc - half_sep + col_shift, g.sigma_r, g.sigma_c, 0.5 * wl});
    out.push_back({cr + row_shift, cc + half_sep + col_shift, g.sigma_r, g.sigma_c, 0.5 * wr});
  };

  switch (prim.kind) {
    case PrimitiveKind::kStand:
      feet(0, 0, g.half_stance, 1.0, 1.0);
      break;
    case PrimitiveKind::kSit: {
      // Brief lowering ramp, then a static seated pose.
      const double s = std::min(1.0, u / 0.2);
      const double hip_w = 0.7 * s;
      const double foot_w = 1.0 - hip_w;
      out.push_back({cr, cc, g.hip_sigma_r, g.hip_sigma_c, hip_w});
      feet(280.0 * s, 0, g.half_stance, foot_w, foot_w);  // feet slide forward
      break;
    }
    case PrimitiveKind::kLie: {
      const double s = std::min(1.0, u / 0.15);
      const double h_mm = g.foot_len / 0.152;  // recover height in mm
      if (s < 1.0) {
        feet(0, 0, g.half_stance, (1.0 - s), (1.0 - s));
      }
      out.push_back({cr - 0.40 * h_mm, cc, 0.04 * h_mm, 0.05 * h_mm, 0.10 * s});    // head
      out.push_back({cr - 0.22 * h_mm, cc, 0.07 * h_mm, 0.11 * h_mm, 0.35 * s});    // shoulders
      out.push_back({cr + 0.05 * h_mm, cc, 0.07 * h_mm, 0.10 * h_mm, 0.40 * s});    // hips
      out.push_back({cr + 0.42 * h_mm, cc, 0.05 * h_mm, 0.06 * h_mm, 0.15 * s});    // heels
      break;
    }
    case PrimitiveKind::kJump: {
      if (u < 0.30) {
        amp_factor = 1.0 + 0.4 * (u / 0.30);  // loading before takeoff
        feet(0, 0, g.half_stance, 1.0, 1.0);
      } else if (u < 0.55) {
        // airborne: no contact, frame stays all zero
      } else if (u < 0.75) {
        amp_factor = 1.8 - 0.8 * (u - 0.55) / 0.20;  // landing impact decay
        feet(0, 0, g.half_stance, 1.0, 1.0);
      } else {
        feet(0, 0, g.half_stance, 1.0, 1.0);
      }
      break;
    }
    case PrimitiveKind::kStepLeft:
    case PrimitiveKind::kStepRight: {
      const double sign = prim.kind == PrimitiveKind::kStepLeft ? -1.0 : 1.0;
      const double phase = 2.0 * kPi * cycles * u;
      const double shift = sign * 60.0 * std::sin(phase);
      const double w = 0.5 + 0.5 * std::sin(phase);  // weight swings between feet
      feet(0, shift, g.half_stance, 2.0 * (1.0 - w), 2.0 * w);
      break;
    }
    case PrimitiveKind::kBend: {
      const double s = updown(u);
      amp_factor = 1.0 + 0.10 * s;
      feet(-0.30 * g.foot_len * s, 0, g.half_stance, 1.0, 1.0);
      break;
    }
    case PrimitiveKind::kSpreadLegs: {
      const double gph = 0.5 - 0.5 * std::cos(2.0 * kPi * cycles * u);
      feet(0, 0, g.half_stance * (1.0 + 0.9 * gph), 1.0, 1.0);
      break;
    }
    case PrimitiveKind::kArmsRaise: {
      const double gph = 0.5 - 0.5 * std::cos(2.0 * kPi * std::max(1.0, cycles * 0.5) * u);
      feet(0.12 * g.foot_len * gph, 0, g.half_stance, 1.0, 1.0);
      break;
    }
  }
}

PressureDynamics render_impl(const MotionScript& script, const BodyProfile& profile,
                             int rows, int cols, float rate_hz, bool normalize) {
  if (script.primitives.empty() || script.total_duration() <= 0.0) {
    throw std::runtime_error("empty script");
  }
  for (const auto& p : script.primitives) {
    if (p.duration_s <= 0.0) throw std::runtime_error("empty script");
  }
  if (rows < 4 || cols < 4) throw std::runtime_error("grid too small");

  const int n_frames = std::max(1, static_cast<int>(std::lround(script.total_duration() * rate_hz)));
  PressureDynamics d = make_dynamics(n_frames, rows, cols, rate_hz);
  const BodyGeom geom = body_geom(profile.height_cm);
  const double fs = full_scale_pressure();

  std::vector<float> frame(static_cast<size_t>(rows) * cols);
  std::vector<Blob> blobs;
  for (int f = 0; f < n_frames; ++f) {
    const double t = (f + 0.5) / rate_hz;
    // Locate the active primitive.
    double acc = 0.0;
    const MotionPrimitive* active = &script.primitives.back();
    double u = 1.0;
    for (const auto& p : script.primitives) {
      if (t < acc + p.duration_s) {
        active = &p;
        u = (t - acc) / p.duration_s;
        break;
      }
      acc += p.duration_s;
    }

    std::fill(frame.begin(), frame.end(), 0.0f);
    blobs.clear();
    double amp = 1.0;
    primitive_blobs(*active, geom, u, blobs, amp);
    for (const auto& b : blobs) splat(frame, rows, cols, b, profile.mass_kg, amp);

    for (int i = 0; i < rows * cols; ++i) {
      float v = frame[static_cast<size_t>(i)];
      if (normalize) v = std::clamp(v / static_cast<float>(fs), 0.0f, 1.0f);
      d.frames(f, i) = v;
    }
  }
  return d;
}

}  // namespace

const char* body_category_name(BodyCategory c) {
  switch (c) {
    case BodyCategory::kHeavyTallMale: return "heavy tall male";
    case BodyCategory::kMediumTallMale: return "medium tall male";
    case BodyCategory::kHeavyTallFemale: return "heavy tall female";
    case BodyCategory::kMediumTallFemale: return "medium tall female";
    case BodyCategory::kLightShort: return "light short";
  }
  return "?";
}

CategoryBounds category_bounds(BodyCategory c) {
  switch (c) {
    case BodyCategory::kHeavyTallMale: return {80, 100, 180, 200};
    case BodyCategory::kMediumTallMale: return {60, 80, 180, 200};
    case BodyCategory::kHeavyTallFemale: return {80, 100, 170, 200};
    case BodyCategory::kMediumTallFemale: return {60, 80, 170, 200};
    case BodyCategory::kLightShort: return {40, 60, 140, 170};
  }
  return {40, 100, 140, 200};
}

BodyProfile sample_body_profile(int64_t seed) {
  Rng rng(static_cast<uint64_t>(seed) * 0x9e3779b97f4a7c15ull + 0x51ed2701);
  BodyProfile p;
  p.profile_seed = seed;
  p.category = static_cast<BodyCategory>(rng.uniform_int(kBodyCategoryCount));
  const CategoryBounds b = category_bounds(p.category);
  p.mass_kg = rng.uniform(b.mass_lo, b.mass_hi);
  p.height_cm = rng.uniform(b.height_lo, b.height_hi);
  return p;
}

const char* primitive_kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::kStand: return "stand";
    case PrimitiveKind::kSit: return "sit";
    case PrimitiveKind::kLie: return "lie";
    case PrimitiveKind::kJump: return "jump";
    case PrimitiveKind::kStepLeft: return "step-left";
    case PrimitiveKind::kStepRight: return "step-right";
    case PrimitiveKind::kBend: return "bend";
    case PrimitiveKind::kSpreadLegs: return "spread-legs";
    case PrimitiveKind::kArmsRaise: return "arms-raise";
  }
  return "?";
}

PrimitiveKind MotionScript::dominant_kind() const {
  std::map<int, double> totals;
  for (const auto& p : primitives) totals[static_cast<int>(p.kind)] += p.duration_s;
  int best = static_cast<int>(primitives.front().kind);
  double best_t = -1.0;
  for (const auto& p : primitives) {
    const int k = static_cast<int>(p.kind);
    if (totals[k] > best_t + 1e-12) {
      best_t = totals[k];
      best = k;
    }
  }
  return static_cast<PrimitiveKind>(best);
}

double full_scale_pressure() {
  // Peak cell value of a 100 kg two-foot stand at the reference height.
  const BodyGeom g = body_geom(kReferenceHeightCm);
  return 0.5 * 100.0 * kRowPitchMm * kColPitchMm / (2.0 * kPi * g.sigma_r * g.sigma_c);
}

PressureDynamics render_pressure(const MotionScript& script, const BodyProfile& profile,
                                 int rows, int cols, float rate_hz) {
  return render_impl(script, profile, rows, cols, rate_hz, true);
}

PressureDynamics render_pressure_raw(const MotionScript& script, const BodyProfile& profile,
                                     int rows, int cols, float rate_hz) {
  return render_impl(script, profile, rows, cols, rate_hz, false);
}

// ---------------------------------------------------------------------------
// Text rendering
// ---------------------------------------------------------------------------

namespace {

const std::array<std::array<const char*, 5>, kPrimitiveKindCount> kVerbPhrases = {{
    // stand
    {{"stands still{pace} with both feet planted",
      "stands upright{pace} on the mat",
      "remains standing{pace} with weight even on both feet",
      "holds a steady standing position{pace}",
      "stands in place{pace} without stepping"}},
    // sit
    {{"sits down{pace} onto the mat",
      "lowers into a seated position{pace}",
      "takes a seat{pace} with feet resting in front",
      "settles down to sit{pace} on the ground",
      "sits back{pace} with weight on the hips"}},
    // lie
    {{"lies down flat{pace} on the mat",
      "reclines fully{pace} onto the back",
      "stretches out lying down{pace}",
      "lowers the whole body{pace} to lie flat",
      "rests lying on the mat{pace}"}},
    // jump
    {{"jumps up{pace} and lands on both feet",
      "leaps upward{pace} and lands with feet together",
      "performs a vertical jump{pace}",
      "springs off the ground{pace} and touches down again",
      "hops straight up{pace} landing on both feet"}},
    // step-left
    {{"steps to the left{pace}",
      "takes a side step to the left{pace}",
      "shifts leftward with a step{pace}",
      "moves one step to the left{pace}",
      "sidesteps left{pace} keeping balance"}},
    // step-right
    {{"steps to the right{pace}",
      "takes a side step to the right{pace}",
      "shifts rightward with a step{pace}",
      "moves one step to the right{pace}",
      "sidesteps right{pace} keeping balance"}},
    // bend
    {{"bends forward{pace} toward the toes",
      "bends down{pace} at the waist",
      "folds forward{pace} reaching downward",
      "leans down{pace} with hands toward the feet",
      "bows forward{pace} from the hips"}},
    // spread-legs
    {{"spreads the legs outward{pace} and brings them back together",
      "jumps the feet apart{pace} and back in",
      "widens the stance{pace} then returns to standing",
      "pushes both feet outward{pace} before closing them again",
      "opens the legs wide{pace} and closes them"}},
    // arms-raise
    {{"raises both arms overhead{pace} while standing",
      "lifts the arms up{pace} and lowers them again",
      "reaches upward with both arms{pace}",
      "swings both arms above the head{pace}",
      "raises the arms{pace} shifting weight slightly"}},
}};

const char* kConnectives[4] = {"Then", "After that", "Next", "Afterwards"};

// Gender-free body descriptors.
std::string body_descriptor(BodyCategory c, int variant) {
  switch (c) {
    case BodyCategory::kHeavyTallMale:
    case BodyCategory::kHeavyTallFemale:
      return variant == 0 ? "heavy-built" : "heavy-built tall";
    case BodyCategory::kMediumTallMale:
    case BodyCategory::kMediumTallFemale:
      return variant == 0 ? "medium-build" : "average-build";
    case BodyCategory::kLightShort:
      return variant == 0 ? "light-built" : "petite";
  }
  return "medium-build";
}

std::string pace_adverb(Pace p, int variant) {
  switch (p) {
    case Pace::kSlow: return variant == 0 ? " slowly" : " at a slow pace";
    case Pace::kFast: return variant == 0 ? " quickly" : " at a fast pace";
    default: return "";
  }
}

std::string replace(std::string s, const std::string& what, const std::string& with) {
  size_t pos = s.find(what);
  if (pos != std::string::npos) s.replace(pos, what.size(), with);
  return s;
}

}  // namespace

std::string render_text(const MotionScript& script, const BodyProfile& profile,
                        int64_t variant_seed) {
  if (script.primitives.empty()) throw std::runtime_error("empty script");
  // Mixed-radix enumeration of surface forms: variant 0 is the canonical
  // sentence and successive seeds walk template, subject, adverb and
  // connective choices.
  uint64_t v = static_cast<uint64_t>(variant_seed);
  auto digit = [&](int base) {
    int d = static_cast<int>(v % static_cast<uint64_t>(base));
    v /= static_cast<uint64_t>(base);
    return d;
  };

  std::ostringstream out;
  for (size_t i = 0; i < script.primitives.size(); ++i) {
    const auto& prim = script.primitives[i];
    const int vp_idx = digit(5);
    std::string vp = kVerbPhrases[static_cast<int>(prim.kind)][vp_idx];
    const int pace_var = prim.pace == Pace::kNormal ? 0 : digit(2);
    vp = replace(vp, "{pace}", pace_adverb(prim.pace, pace_var));

    if (i == 0) {
      const int body_var = digit(2);
      const int subj_var = digit(2);
      const std::string subj = std::string("A ") + body_descriptor(profile.category, body_var) +
                               (subj_var == 0 ? " adult" : " person");
      out << subj << " " << vp << ".";
    } else {
      const int conn = digit(4);
      out << " " << kConnectives[conn] << " the person " << vp << ".";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Corpus building
// ---------------------------------------------------------------------------

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

MotionScript sample_script(Rng& rng) {
  MotionScript s;
  const int64_t roll = rng.uniform_int(10);
  const int count = roll < 6 ? 1 : (roll < 9 ? 2 : 3);
  for (int i = 0; i < count; ++i) {
    MotionPrimitive p;
    p.kind = static_cast<PrimitiveKind>(rng.uniform_int(kPrimitiveKindCount));
    p.pace = static_cast<Pace>(rng.uniform_int(3));
    double base;
    switch (p.kind) {
      case PrimitiveKind::kStand:
      case PrimitiveKind::kSit: base = rng.uniform(1.4, 2.2); break;
      case PrimitiveKind::kLie: base = rng.uniform(1.6, 2.4); break;
      case PrimitiveKind::kJump: base = rng.uniform(1.0, 1.5); break;
      case PrimitiveKind::kStepLeft:
      case PrimitiveKind::kStepRight: base = rng.uniform(0.9, 1.4); break;
      default: base = rng.uniform(1.2, 1.8); break;
    }
    p.duration_s = base * pace_factor(p.pace);
    s.primitives.push_back(p);
  }
  return s;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

const char* pace_name(Pace p) {
  switch (p) {
    case Pace::kSlow: return "slow";
    case Pace::kFast: return "fast";
    default: return "normal";
  }
}

std::string script_to_string(const MotionScript& script) {
  std::ostringstream out;
  for (size_t i = 0; i < script.primitives.size(); ++i) {
    const auto& p = script.primitives[i];
    if (i) out << ',';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", p.duration_s);
    out << primitive_kind_name(p.kind) << ':' << buf << ':' << pace_name(p.pace);
  }
  return out.str();
}

MotionScript script_from_string(const std::string& spec) {
  MotionScript s;
  std::istringstream in(spec);
  std::string part;
  while (std::getline(in, part, ',')) {
    const size_t a = part.find(':');
    const size_t b = part.rfind(':');
    if (a == std::string::npos || b == a) throw std::runtime_error("bad script spec: " + spec);
    MotionPrimitive p;
    const std::string kind = part.substr(0, a);
    bool found = false;
    for (int i = 0; i < kPrimitiveKindCount; ++i) {
      if (kind == primitive_kind_name(static_cast<PrimitiveKind>(i))) {
        p.kind = static_cast<PrimitiveKind>(i);
        found = true;
      }
    }
    if (!found) throw std::runtime_error("bad primitive kind: " + kind);
    p.duration_s = std::stod(part.substr(a + 1, b - a - 1));
    const std::string pace = part.substr(b + 1);
    p.pace = pace == "slow" ? Pace::kSlow : (pace == "fast" ? Pace::kFast : Pace::kNormal);
    s.primitives.push_back(p);
  }
  if (s.primitives.empty()) throw std::runtime_error("bad script spec: " + spec);
  return s;
}

std::vector<PairedSample> build_corpus(const CorpusConfig& config, const std::string& out_dir) {
  if (config.size < 20) throw std::runtime_error("too small to split");
  if (config.variants < 1) throw std::runtime_error("variants must be >= 1");

  fs::create_directories(fs::path(out_dir) / "samples");

  const int n_scripts = (config.size + config.variants - 1) / config.variants;
  std::vector<PairedSample> samples;
  samples.reserve(config.size);
  std::set<std::string> seen_texts;

  for (int si = 0; si < n_scripts; ++si) {
    Rng script_rng(static_cast<uint64_t>(config.seed) * 0x2545f4914f6cdd1dull + si);
    const MotionScript script = sample_script(script_rng);
    for (int vi = 0; vi < config.variants && static_cast<int>(samples.size()) < config.size; ++vi) {
      PairedSample s;
      s.id = static_cast<int64_t>(samples.size());
      s.script = script;
      s.label = script.dominant_kind();
      s.profile = sample_body_profile(config.seed * 1000003 + s.id);
      // Bump the variant seed until the surface form is unique; this keeps
      // train/val/test description sets disjoint by construction.
      int64_t variant = s.id;
      std::string text;
      for (int tries = 0; tries < 4096; ++tries) {
        text = render_text(script, s.profile, variant);
        if (seen_texts.insert(text).second) break;
        variant += 7919;
        text.clear();
      }
      if (text.empty()) throw std::runtime_error("could not produce a unique description");
      s.variant_seed = variant;
      s.text = text;
      char pathbuf[64];
      std::snprintf(pathbuf, sizeof(pathbuf), "samples/sample_%06lld.prsd",
                    static_cast<long long>(s.id));
      s.path = pathbuf;
      samples.push_back(std::move(s));
    }
  }

  // 80/5/15 split over a seeded shuffle of sample indices.
  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng split_rng(static_cast<uint64_t>(config.seed) ^ 0xabcdef12345ull);
  split_rng.shuffle(order);
  const int n = static_cast<int>(samples.size());
  const int n_train = static_cast<int>(std::floor(n * 0.80));
  const int n_val = static_cast<int>(std::floor(n * 0.05));
  for (int i = 0; i < n; ++i) {
    Split sp = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    samples[static_cast<size_t>(order[i])].split = sp;
  }

  // Render and write tensors.
  for (const auto& s : samples) {
    PressureDynamics d = render_pressure(s.script, s.profile, config.rows, config.cols,
                                         config.rate_hz);
    io::write_prsd((fs::path(out_dir) / s.path).string(), d);
  }

  // Manifest: header comments then one TSV record per sample.
  std::ofstream mf(fs::path(out_dir) / "manifest.tsv", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot write manifest in " + out_dir);
  mf << "# presstok corpus\n";
  mf << "# config_hash = " << config.config_hash << "\n";
  mf << "# seed = " << config.seed << "\n";
  mf << "# size = " << samples.size() << "\n";
  mf << "# grid = " << config.rows << "x" << config.cols << "\n";
  mf << "# rate_hz = " << format_double(config.rate_hz) << "\n";
  for (const auto& s : samples) {
    mf << s.id << '\t' << split_name(s.split) << '\t' << primitive_kind_name(s.label) << '\t'
       << s.text << '\t' << format_double(s.profile.mass_kg) << '\t'
       << format_double(s.profile.height_cm) << '\t'
       << body_category_name(s.profile.category) << '\t' << s.profile.profile_seed << '\t'
       << script_to_string(s.script) << '\t' << s.path << '\n';
  }
  return samples;
}

std::vector<PairedSample> load_manifest(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.tsv");
  if (!mf) throw std::runtime_error("cannot read manifest in " + dir);
  std::vector<PairedSample> samples;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 9) throw std::runtime_error("malformed manifest record: " + line);
    PairedSample s;
    s.id = std::stoll(fields[0]);
    for (int i = 0; i < 3; ++i) {
      if (fields[1] == split_name(static_cast<Split>(i))) s.split = static_cast<Split>(i);
    }
    for (int i = 0; i < kPrimitiveKindCount; ++i) {
      if (fields[2] == primitive_kind_name(static_cast<PrimitiveKind>(i))) {
        s.label = static_cast<PrimitiveKind>(i);
      }
    }
    s.text = fields[3];
    s.profile.mass_kg = std::stod(fields[4]);
    s.profile.height_cm = std::stod(fields[5]);
    for (int i = 0; i < kBodyCategoryCount; ++i) {
      if (fields[6] == body_category_name(static_cast<BodyCategory>(i))) {
        s.profile.category = static_cast<BodyCategory>(i);
      }
    }
    s.profile.profile_seed = std::stoll(fields[7]);
    s.path = fields[8];
    samples.push_back(std::move(s));
  }
  return samples;
}

PressureDynamics load_sample(const std::string& dir, const PairedSample& sample) {
  return io::read_prsd((fs::path(dir) / sample.path).string());
}

}  // namespace presstok::corpus
