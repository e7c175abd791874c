#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "neuroscan/image.hpp"
#include "neuroscan/labels.hpp"

namespace neuroscan::dataset {

namespace fs = std::filesystem;

/// One image sample.
struct CaseRecord {
  std::string case_id;
  fs::path image_ref;
  Label label = Label::no_tumor;
  std::optional<fs::path> mask_ref;
  Split split = Split::train;
  std::string source;

  bool operator==(const CaseRecord&) const = default;
};

struct SplitFractions {
  double train = 1.0;
  double val = 0.0;
  double test = 0.0;

  double at(Split s) const { return s == Split::train ? train : s == Split::val ? val : test; }
  bool operator==(const SplitFractions&) const = default;
};

/// Parses "0.7,0.15,0.15". Throws ValidationError on malformed input or when
/// the fractions are negative or do not sum to 1.
SplitFractions parse_fractions(const std::string& text);
void validate_fractions(const SplitFractions& f);

struct Manifest {
  std::vector<CaseRecord> records;
  std::uint64_t seed = 0;
  SplitFractions split_fractions;  // (1,0,0) until split_manifest runs
  std::string created_at;

  std::size_t count(Split s) const;
  std::vector<const CaseRecord*> in_split(Split s) const;
  const CaseRecord* find(const std::string& case_id) const;
};

/// ISO-8601 UTC timestamp; honors SOURCE_DATE_EPOCH for reproducible output.
std::string timestamp_now();

/// Checks unique ids, fraction sum and split/seed consistency.
/// Throws ValidationError describing the first violation.
void validate_manifest(const Manifest& m);

nlohmann::json to_json(const Manifest& m, const fs::path& base_dir = {});
/// Relative refs are resolved against base_dir.
Manifest manifest_from_json(const nlohmann::json& j, const fs::path& base_dir = {});

/// Image/mask refs are stored relative to the manifest file's directory.
void save_manifest(const Manifest& m, const fs::path& path);
Manifest load_manifest(const fs::path& path);

// --- ingestion --------------------------------------------------------------

/// Subdirectory name -> label.
using LabelRule = std::map<std::string, Label>;

/// Identity rule: meningioma/, glioma/, pituitary/, no_tumor/.
LabelRule default_label_rule();
/// Parses "dir=label,dir=label". Throws ValidationError.
LabelRule parse_label_rule(const std::string& text);

struct IngestIssue {
  fs::path path;
  std::string message;
};

struct IngestResult {
  Manifest manifest;
  std::vector<IngestIssue> issues;  // rejected files, one entry each
};

/// Builds one record per readable PNG under root/<subdir>/ for every subdir
/// named in the rule. A mask for root/<subdir>/<stem>.png is looked up at
/// root/masks/<subdir>/<stem>.png, then root/masks/<stem>.png. Files that
/// fail to decode, have an incongruent mask, or carry a nonzero mask under a
/// no_tumor label are reported as issues and skipped. All records start in the
/// train split. Throws ValidationError when root is missing or yields no
/// images at all.
IngestResult ingest_directory(const fs::path& root, const LabelRule& rule,
                              const std::string& source = {});

// --- splitting --------------------------------------------------------------

struct SplitCount {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  std::size_t total() const { return train + val + test; }
  std::size_t at(Split s) const { return s == Split::train ? train : s == Split::val ? val : test; }
  bool operator==(const SplitCount&) const = default;
};

/// Per-label split sizes. Global train and val totals are floor(N*f); test
/// takes the remainder. Each label's count in each split is within one record
/// of fraction*label_total.
std::array<SplitCount, kNumClasses> stratified_counts(const std::array<std::size_t, kNumClasses>& label_totals,
                                                      const SplitFractions& f);

/// Assigns every record to train/val/test. The result depends only on the set
/// of case ids (with labels), the seed and the fractions; input order is
/// preserved. Throws ValidationError for bad fractions or fewer than 3 records.
Manifest split_manifest(const Manifest& m, const SplitFractions& f, std::uint64_t seed);

// --- phantoms ---------------------------------------------------------------

struct Phantom {
  RawImage image;  // 8-bit
  SegmentationMask mask;
};

/// Renders one synthetic slice: a head outline with textured brain tissue and,
/// for tumor labels, one class-specific lesion. The mask is exactly the set of
/// pixels the lesion was painted into.
Phantom render_phantom(Label label, int size, std::uint64_t seed);

/// Number of phantoms per class for n samples under the given mix
/// (largest-remainder apportionment).
std::array<std::size_t, kNumClasses> phantom_class_counts(std::size_t n, const std::array<double, kNumClasses>& mix);

/// Writes n phantoms under out_dir/<label>/phantom_NNNNN.png with masks under
/// out_dir/masks/<label>/ (all-zero masks for no_tumor) and returns the
/// matching unsplit manifest. Throws ValidationError when n < 4 or size < 32.
Manifest generate_phantoms(std::size_t n, int size, std::uint64_t seed,
                           const std::array<double, kNumClasses>& class_mix, const fs::path& out_dir);

}  // namespace neuroscan::dataset
