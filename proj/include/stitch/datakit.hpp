#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stitch/geometry.hpp"
#include "stitch/tensor.hpp"

namespace stitch {

struct PairRecord {
    std::string id;
    std::string ref_path;
    std::string target_path;
    std::optional<FourPointOffsets> truth_offsets;  // present iff synthetic
    std::optional<std::string> overlap_level;
    std::optional<std::string> parallax_level;
};

struct SynthParams {
    double disturbance = 32.0;  // max corner perturbation, px
    int crop_size = 128;
    bool photometric_jitter = false;  // per-image gain/bias on the target
};

struct DatasetManifest {
    std::vector<PairRecord> records;
    std::uint64_t seed = 0;           // generation seed (synthetic sets)
    SynthParams params;

    std::string to_json() const;
    static DatasetManifest from_json(const std::string& text);
    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

struct DecodedPair {
    PairRecord record;
    Tensor4 ref;
    Tensor4 target;
};

// Renders one synthetic pair from `source`: the reference is the central
// crop, the target is the source resampled through the inverse of a random
// corner-perturbation homography, so the offsets that align target to
// reference are known exactly. Writes <id>_ref.png / <id>_target.png under
// out_dir.
PairRecord gen_synthetic_pair(const Tensor4& source, const SynthParams& params,
                              std::uint64_t seed, const std::string& out_dir,
                              const std::string& id);

// Generates n pairs (record k drawn from stream k of `seed`) and writes
// manifest.json alongside the images.
DatasetManifest gen_synthetic_dataset(const Tensor4& source, int n,
                                      const SynthParams& params, std::uint64_t seed,
                                      const std::string& out_dir);

// Decodes every record in the manifest; paths are resolved relative to the
// manifest's directory. Throws DataError naming the record id on missing
// files, decode failures, or mismatched pair sizes.
std::vector<DecodedPair> load_dataset(const std::string& manifest_path);

// Builds a manifest from sibling reference/ and target/ directories with
// matching filenames (real pairs, no ground truth).
DatasetManifest scan_real_pairs(const std::string& root_dir);

void save_image(const Tensor4& image, const std::string& path);

}  // namespace stitch
