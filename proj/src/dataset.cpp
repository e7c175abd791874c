#include "neuroscan/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "neuroscan/error.hpp"
#include "neuroscan/png_io.hpp"
#include "neuroscan/rng.hpp"

namespace neuroscan::dataset {
namespace {

constexpr double kFractionTolerance = 1e-9;
// Guards floor() against products such as 10*0.7 landing a hair below 7.
constexpr double kFloorSlack = 1e-9;

std::size_t floor_count(double x) { return static_cast<std::size_t>(std::floor(x + kFloorSlack)); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

bool is_png(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

std::string ref_string(const fs::path& p, const fs::path& base_dir) {
  if (base_dir.empty()) return p.generic_string();
  // In-memory refs are absolute or relative to the working directory.
  const fs::path rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base_dir).lexically_normal());
  if (rel.empty()) return p.generic_string();
  return rel.generic_string();
}

fs::path resolve_ref(const std::string& ref, const fs::path& base_dir) {
  fs::path p(ref);
  if (p.is_absolute() || base_dir.empty()) return p;
  return (base_dir / p).lexically_normal();
}

}  // namespace

SplitFractions parse_fractions(const std::string& text) {
  const auto parts = split_on(text, ',');
  if (parts.size() != 3) {
    throw ValidationError("split fractions must be three comma-separated numbers (train,val,test), got '" +
                          text + "'");
  }
  SplitFractions f;
  double* dst[3] = {&f.train, &f.val, &f.test};
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      *dst[i] = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
    } catch (const std::exception&) {
      throw ValidationError("split fraction '" + parts[i] + "' is not a number");
    }
  }
  validate_fractions(f);
  return f;
}

void validate_fractions(const SplitFractions& f) {
  if (!(f.train >= 0.0 && f.val >= 0.0 && f.test >= 0.0)) {
    throw ValidationError("split fractions must be non-negative");
  }
  const double sum = f.train + f.val + f.test;
  if (std::abs(sum - 1.0) > kFractionTolerance) {
    std::ostringstream os;
    os << "split fractions must sum to 1 (got " << std::setprecision(12) << sum << ")";
    throw ValidationError(os.str());
  }
}

std::size_t Manifest::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [s](const CaseRecord& r) { return r.split == s; }));
}

std::vector<const CaseRecord*> Manifest::in_split(Split s) const {
  std::vector<const CaseRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

const CaseRecord* Manifest::find(const std::string& case_id) const {
  for (const auto& r : records) {
    if (r.case_id == case_id) return &r;
  }
  return nullptr;
}

std::string timestamp_now() {
  std::time_t t = 0;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde != nullptr && *sde != '\0') {
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void validate_manifest(const Manifest& m) {
  validate_fractions(m.split_fractions);
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    if (r.case_id.empty()) throw ValidationError("manifest record with empty case_id");
    if (!seen.insert(r.case_id).second) throw ValidationError("duplicate case_id '" + r.case_id + "'");
  }
  if (m.records.size() < 3) {
    // split_manifest needs >= 3 records; smaller manifests can only be unsplit
    if (m.count(Split::train) != m.records.size()) {
      throw ValidationError("manifest with fewer than 3 records must be unsplit");
    }
    return;
  }
  const Manifest expected = split_manifest(m, m.split_fractions, m.seed);
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    if (expected.records[i].split != m.records[i].split) {
      throw ValidationError("record '" + m.records[i].case_id + "' has split '" +
                            std::string(to_string(m.records[i].split)) +
                            "' which is inconsistent with the manifest seed and fractions");
    }
  }
}

nlohmann::json to_json(const Manifest& m, const fs::path& base_dir) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : m.records) {
    records.push_back({
        {"case_id", r.case_id},
        {"image_ref", ref_string(r.image_ref, base_dir)},
        {"label", std::string(to_string(r.label))},
        {"mask_ref", r.mask_ref ? nlohmann::json(ref_string(*r.mask_ref, base_dir)) : nlohmann::json(nullptr)},
        {"split", std::string(to_string(r.split))},
        {"source", r.source},
    });
  }
  return {
      {"seed", m.seed},
      {"split_fractions", {m.split_fractions.train, m.split_fractions.val, m.split_fractions.test}},
      {"created_at", m.created_at},
      {"records", std::move(records)},
  };
}

Manifest manifest_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  try {
    Manifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& f = j.at("split_fractions");
    if (!f.is_array() || f.size() != 3) throw ValidationError("split_fractions must be an array of 3 numbers");
    m.split_fractions = {f[0].get<double>(), f[1].get<double>(), f[2].get<double>()};
    m.created_at = j.value("created_at", std::string{});
    for (const auto& jr : j.at("records")) {
      CaseRecord r;
      r.case_id = jr.at("case_id").get<std::string>();
      r.image_ref = resolve_ref(jr.at("image_ref").get<std::string>(), base_dir);
      r.label = label_from_string(jr.at("label").get<std::string>());
      if (jr.contains("mask_ref") && !jr.at("mask_ref").is_null()) {
        r.mask_ref = resolve_ref(jr.at("mask_ref").get<std::string>(), base_dir);
      }
      r.split = split_from_string(jr.value("split", std::string("train")));
      r.source = jr.value("source", std::string{});
      m.records.push_back(std::move(r));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
}

void save_manifest(const Manifest& m, const fs::path& path) {
  const fs::path abs = fs::absolute(path);
  if (abs.has_parent_path()) fs::create_directories(abs.parent_path());
  std::ofstream os(abs);
  if (!os) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
  os << to_json(m, abs.parent_path()).dump(2) << '\n';
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  Manifest m = manifest_from_json(j, fs::absolute(path).parent_path());
  validate_manifest(m);
  return m;
}

// --- ingestion --------------------------------------------------------------

LabelRule default_label_rule() {
  LabelRule rule;
  for (Label l : kClassOrder) rule.emplace(std::string(to_string(l)), l);
  return rule;
}

LabelRule parse_label_rule(const std::string& text) {
  LabelRule rule;
  for (const auto& item : split_on(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ValidationError("label rule entries must look like 'dir=label', got '" + item + "'");
    }
    rule[trim(item.substr(0, eq))] = label_from_string(trim(item.substr(eq + 1)));
  }
  if (rule.empty()) throw ValidationError("empty label rule");
  return rule;
}

IngestResult ingest_directory(const fs::path& root, const LabelRule& rule, const std::string& source) {
  if (!fs::is_directory(root)) throw ValidationError("dataset root '" + root.string() + "' is not a directory");

  IngestResult result;
  result.manifest.split_fractions = {1.0, 0.0, 0.0};
  result.manifest.created_at = timestamp_now();
  std::size_t seen_files = 0;

  for (const auto& [subdir, label] : rule) {
    const fs::path dir = root / subdir;
    if (!fs::is_directory(dir)) {
      result.issues.push_back({dir, "class directory missing"});
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_png(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) result.issues.push_back({dir, "class directory contains no PNG images"});

    for (const auto& file : files) {
      ++seen_files;
      RawImage img;
      try {
        img = png::read_gray(file);
      } catch (const std::exception& e) {
        result.issues.push_back({file, e.what()});
        continue;
      }
      CaseRecord rec;
      rec.case_id = subdir + "/" + file.stem().string();
      rec.image_ref = file;
      rec.label = label;
      rec.source = source;

      for (const fs::path& candidate : {root / "masks" / subdir / (file.stem().string() + ".png"),
                                        root / "masks" / (file.stem().string() + ".png")}) {
        if (fs::is_regular_file(candidate)) {
          rec.mask_ref = candidate;
          break;
        }
      }
      if (rec.mask_ref) {
        SegmentationMask mask;
        try {
          mask = png::read_mask(*rec.mask_ref);
        } catch (const std::exception& e) {
          result.issues.push_back({*rec.mask_ref, e.what()});
          continue;
        }
        if (mask.height != img.height || mask.width != img.width) {
          result.issues.push_back({*rec.mask_ref, "mask size does not match image size"});
          continue;
        }
        if (label == Label::no_tumor && mask.foreground() > 0) {
          result.issues.push_back({*rec.mask_ref, "no_tumor image has a nonzero mask"});
          continue;
        }
      }
      result.manifest.records.push_back(std::move(rec));
    }
  }
  if (seen_files == 0) {
    throw ValidationError("dataset root '" + root.string() + "' contains no images under the labelled directories");
  }
  return result;
}

// --- splitting --------------------------------------------------------------

std::array<SplitCount, kNumClasses> stratified_counts(const std::array<std::size_t, kNumClasses>& totals,
                                                      const SplitFractions& f) {
  validate_fractions(f);
  const std::array<double, 3> frac = {f.train, f.val, f.test};
  const std::size_t n = std::accumulate(totals.begin(), totals.end(), std::size_t{0});

  std::array<std::array<std::size_t, 3>, kNumClasses> base{};
  std::array<std::array<double, 3>, kNumClasses> rem{};
  std::array<std::size_t, kNumClasses> leftover{};
  for (std::size_t l = 0; l < kNumClasses; ++l) {
    std::size_t used = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double q = static_cast<double>(totals[l]) * frac[j];
      base[l][j] = std::min(floor_count(q), totals[l] - used);
      rem[l][j] = q - static_cast<double>(base[l][j]);
      used += base[l][j];
    }
    leftover[l] = totals[l] - used;
  }

  // Column targets: floor(N*f) for train and val, remainder to test.
  std::array<std::size_t, 3> target{};
  target[0] = floor_count(static_cast<double>(n) * frac[0]);
  target[1] = std::min(floor_count(static_cast<double>(n) * frac[1]), n - target[0]);
  target[2] = n - target[0] - target[1];
  std::array<std::ptrdiff_t, 3> deficit{};
  for (std::size_t j = 0; j < 3; ++j) {
    std::size_t s = 0;
    for (std::size_t l = 0; l < kNumClasses; ++l) s += base[l][j];
    deficit[j] = static_cast<std::ptrdiff_t>(target[j]) - static_cast<std::ptrdiff_t>(s);
  }

  // Distribute each label's leftover records over the three splits so that the
  // column targets are met exactly. Cells get at most `cap` extra records; the
  // search prefers cells with the largest fractional remainders. At most 3^4
  // combinations, so exhaustive search is fine.
  using Assignment = std::array<std::array<std::size_t, 3>, kNumClasses>;
  auto search = [&](std::size_t cap, Assignment& best) {
    double best_score = -1.0;
    Assignment cur{};
    std::array<std::ptrdiff_t, 3> left = deficit;
    std::function<void(std::size_t, double)> rec = [&](std::size_t l, double score) {
      if (l == kNumClasses) {
        if (left[0] == 0 && left[1] == 0 && left[2] == 0 && score > best_score + 1e-12) {
          best_score = score;
          best = cur;
        }
        return;
      }
      // enumerate (a,b,c) with a+b+c = leftover[l], each <= cap
      const std::size_t k = leftover[l];
      for (std::size_t a = 0; a <= std::min(k, cap); ++a) {
        for (std::size_t b = 0; a + b <= k && b <= cap; ++b) {
          const std::size_t c = k - a - b;
          if (c > cap) continue;
          const std::array<std::size_t, 3> inc = {a, b, c};
          bool ok = true;
          for (std::size_t j = 0; j < 3; ++j) ok = ok && left[j] >= static_cast<std::ptrdiff_t>(inc[j]);
          if (!ok) continue;
          double gain = 0.0;
          for (std::size_t j = 0; j < 3; ++j) {
            left[j] -= static_cast<std::ptrdiff_t>(inc[j]);
            gain += static_cast<double>(inc[j]) * rem[l][j];
          }
          cur[l] = inc;
          rec(l + 1, score + gain);
          for (std::size_t j = 0; j < 3; ++j) left[j] += static_cast<std::ptrdiff_t>(inc[j]);
        }
      }
      cur[l] = {0, 0, 0};
    };
    rec(0, 0.0);
    return best_score >= 0.0;
  };

  Assignment extra{};
  if (!search(1, extra) && !search(2, extra)) {
    // Not reachable for valid inputs; keep the column targets anyway.
    extra = {};
    for (std::size_t l = 0; l < kNumClasses; ++l) extra[l][2] = leftover[l];
  }

  std::array<SplitCount, kNumClasses> out{};
  for (std::size_t l = 0; l < kNumClasses; ++l) {
    out[l] = {base[l][0] + extra[l][0], base[l][1] + extra[l][1], base[l][2] + extra[l][2]};
  }
  return out;
}

Manifest split_manifest(const Manifest& m, const SplitFractions& f, std::uint64_t seed) {
  validate_fractions(f);
  if (m.records.size() < 3) throw ValidationError("split_manifest needs at least 3 records");

  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < m.records.size(); ++i) members[index_of(m.records[i].label)].push_back(i);

  std::array<std::size_t, kNumClasses> totals{};
  for (std::size_t l = 0; l < kNumClasses; ++l) totals[l] = members[l].size();
  const auto counts = stratified_counts(totals, f);

  Manifest out = m;
  out.seed = seed;
  out.split_fractions = f;
  for (std::size_t l = 0; l < kNumClasses; ++l) {
    auto& idx = members[l];
    // Canonical order first so that input order does not matter.
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return m.records[a].case_id < m.records[b].case_id; });
    Rng rng(derive_seed({seed, l, 0x5b1170ULL}));
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      Split s = Split::test;
      if (k < counts[l].train) {
        s = Split::train;
      } else if (k < counts[l].train + counts[l].val) {
        s = Split::val;
      }
      out.records[idx[k]].split = s;
    }
  }
  return out;
}

// --- phantoms ---------------------------------------------------------------

namespace {

struct Ellipse {
  double cy, cx, ry, rx, angle;

  // <= 1 inside
  double radius(double y, double x) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (dx * c + dy * s) / rx;
    const double v = (-dx * s + dy * c) / ry;
    return std::sqrt(u * u + v * v);
  }
};

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Phantom render_phantom(Label label, int size, std::uint64_t seed) {
  if (size < 32) throw ValidationError("phantom size must be at least 32 pixels");
  Rng rng(seed);
  const double s = size;
  std::vector<double> img(static_cast<std::size_t>(size) * size, 0.0);
  SegmentationMask mask(size, size);

  // Head: skull ring around an elliptical brain.
  const Ellipse head{s / 2 + rng.uniform(-0.02, 0.02) * s, s / 2 + rng.uniform(-0.02, 0.02) * s,
                     s * rng.uniform(0.42, 0.45), s * rng.uniform(0.36, 0.40), rng.uniform(-0.15, 0.15)};
  const double skull = std::max(1.5, s / 32.0) / std::min(head.rx, head.ry);

  // Smooth tissue texture from a few random plane waves.
  struct Wave {
    double ky, kx, phase, amp;
  };
  std::array<Wave, 4> waves{};
  for (auto& w : waves) {
    const double freq = rng.uniform(1.0, 4.0) * 2.0 * kPi / s;
    const double dir = rng.uniform(0.0, 2.0 * kPi);
    w = {freq * std::sin(dir), freq * std::cos(dir), rng.uniform(0.0, 2.0 * kPi), rng.uniform(0.01, 0.025)};
  }
  const double tissue = rng.uniform(0.30, 0.36);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = head.radius(y + 0.5, x + 0.5);
      double v = 0.0;
      if (r <= 1.0 - skull) {
        v = tissue;
        for (const auto& w : waves) v += w.amp * std::sin(w.ky * y + w.kx * x + w.phase);
        v += rng.normal(0.0, 0.012);
      } else if (r <= 1.0) {
        v = 0.97 + rng.normal(0.0, 0.01);
      } else {
        v = std::abs(rng.normal(0.0, 0.01));
      }
      img[static_cast<std::size_t>(y) * size + x] = v;
    }
  }

  if (is_tumor(label)) {
    // Lesion geometry and texture differ per class; everything is placed well
    // inside the brain so the skull never overlaps the mask.
    const double brain_ry = head.ry * (1.0 - skull);
    const double brain_rx = head.rx * (1.0 - skull);
    double radius = 0.0;
    double place_r = 0.0;  // radial placement as a fraction of the brain radius
    double place_theta = 0.0;
    double elong = 1.0;
    std::array<double, 3> harmonics{};
    std::array<double, 3> harm_phase{};
    switch (label) {
      case Label::meningioma:  // round, homogeneous, near the skull
        radius = s * rng.uniform(0.10, 0.13);
        place_r = 1.0 - (radius + std::max(2.0, s / 24.0)) / std::min(brain_rx, brain_ry);
        place_theta = rng.uniform(0.0, 2.0 * kPi);
        elong = rng.uniform(0.9, 1.1);
        break;
      case Label::glioma:  // irregular, heterogeneous, hemispheric
        radius = s * rng.uniform(0.12, 0.16);
        place_r = rng.uniform(0.2, 0.35);
        place_theta = rng.bernoulli(0.5) ? rng.uniform(-0.6, 0.6) : kPi + rng.uniform(-0.6, 0.6);
        elong = rng.uniform(0.8, 1.2);
        for (std::size_t k = 0; k < harmonics.size(); ++k) {
          harmonics[k] = rng.uniform(0.06, 0.14);
          harm_phase[k] = rng.uniform(0.0, 2.0 * kPi);
        }
        break;
      case Label::pituitary:  // small, bright, midline below centre
        radius = s * rng.uniform(0.08, 0.10);
        place_r = rng.uniform(0.25, 0.35);
        place_theta = kPi / 2 + rng.uniform(-0.15, 0.15);
        elong = rng.uniform(0.7, 0.85);
        break;
      case Label::no_tumor:
        break;
    }
    const double cy = head.cy + place_r * brain_ry * std::sin(place_theta);
    const double cx = head.cx + place_r * brain_rx * std::cos(place_theta);
    const double angle = rng.uniform(0.0, kPi);

    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double py = y + 0.5 - cy;
        const double px = x + 0.5 - cx;
        const double c = std::cos(angle);
        const double sn = std::sin(angle);
        const double u = (px * c + py * sn) / (radius * elong);
        const double v = (-px * sn + py * c) / radius;
        const double rho = std::sqrt(u * u + v * v);
        double bound = 1.0;
        if (label == Label::glioma) {
          const double phi = std::atan2(v, u);
          for (std::size_t k = 0; k < harmonics.size(); ++k) {
            bound += harmonics[k] * std::sin(static_cast<double>(k + 2) * phi + harm_phase[k]);
          }
        }
        if (rho > bound) continue;
        double val = 0.0;
        switch (label) {
          case Label::meningioma: val = 0.74 + rng.normal(0.0, 0.015); break;
          case Label::glioma:
            val = (rho < 0.45 * bound ? 0.56 : 0.66) + rng.normal(0.0, 0.04);
            val = std::clamp(val, 0.52, 0.80);
            break;
          case Label::pituitary: val = 0.88 + rng.normal(0.0, 0.012); break;
          case Label::no_tumor: break;
        }
        img[static_cast<std::size_t>(y) * size + x] = val;
        mask.at(y, x) = 1;
      }
    }
  }

  Phantom out;
  out.image = RawImage(size, size, 8);
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.image.pixels[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img[i], 0.0, 1.0) * 255.0));
  }
  out.mask = std::move(mask);
  return out;
}

std::array<std::size_t, kNumClasses> phantom_class_counts(std::size_t n, const std::array<double, kNumClasses>& mix) {
  double total = 0.0;
  for (double p : mix) {
    if (!(p >= 0.0)) throw ValidationError("class mix proportions must be non-negative");
    total += p;
  }
  if (total <= 0.0) throw ValidationError("class mix must have a positive proportion");
  std::array<std::size_t, kNumClasses> counts{};
  std::array<double, kNumClasses> rem{};
  std::size_t used = 0;
  for (std::size_t l = 0; l < kNumClasses; ++l) {
    const double q = static_cast<double>(n) * mix[l] / total;
    counts[l] = floor_count(q);
    rem[l] = q - static_cast<double>(counts[l]);
    used += counts[l];
  }
  std::array<std::size_t, kNumClasses> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; used < n; k = (k + 1) % kNumClasses, ++used) ++counts[order[k]];
  return counts;
}

Manifest generate_phantoms(std::size_t n, int size, std::uint64_t seed,
                           const std::array<double, kNumClasses>& class_mix, const fs::path& out_dir) {
  if (n < 4) throw ValidationError("phantom count must be at least 4 to cover all classes");
  if (size < 32) throw ValidationError("phantom size must be at least 32 pixels");
  const auto counts = phantom_class_counts(n, class_mix);

  std::vector<Label> labels;
  for (std::size_t l = 0; l < kNumClasses; ++l) labels.insert(labels.end(), counts[l], kClassOrder[l]);
  Rng order_rng(derive_seed({seed, 0x0dd3ULL}));
  order_rng.shuffle(labels.begin(), labels.end());

  Manifest m;
  m.seed = seed;
  m.split_fractions = {1.0, 0.0, 0.0};
  m.created_at = timestamp_now();
  m.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Label label = labels[i];
    const Phantom ph = render_phantom(label, size, derive_seed({seed, i, 0xfa47ULL}));
    std::ostringstream stem;
    stem << "phantom_" << std::setw(5) << std::setfill('0') << i;
    const std::string name(to_string(label));
    const fs::path image_path = out_dir / name / (stem.str() + ".png");
    const fs::path mask_path = out_dir / "masks" / name / (stem.str() + ".png");
    png::write_gray(image_path, ph.image);
    png::write_mask(mask_path, ph.mask);

    CaseRecord rec;
    rec.case_id = name + "/" + stem.str();
    rec.image_ref = image_path;
    rec.label = label;
    rec.mask_ref = mask_path;
    rec.source = "phantom";
    m.records.push_back(std::move(rec));
  }
  return m;
}

}  // namespace neuroscan::dataset
