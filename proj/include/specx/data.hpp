#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specx/tensor.hpp"

namespace specx {

// PGM (P5) -> [1,H,W], PPM (P6) -> [3,H,W], 8-bit values scaled to [0,1].
// Malformed files fail with the offending byte offset.
Tensor load_image(const std::string& path);

// [1,H,W] -> P5, [3,H,W] -> P6; values clamped to [0,1], rounded to 8 bits.
void save_image(const std::string& path, const Tensor& image);

// Replicates a single plane up to `channels`; pass-through when they match.
Tensor expand_channels(const Tensor& image, std::size_t channels);

struct ArtifactSpec {
    std::string mode = "grid";  // grid | radial-peaks | checkerboard-upsample
    int freq = 12;              // radial bin of the injected peaks (grid, radial-peaks)
    double amp = 0.15;          // spatial amplitude of each injected cosine
    double phase_jitter = 1.0;  // fraction of a full turn randomized per image
};

struct GeneratorOptions {
    int n_per_class = 100;
    std::size_t h = 64, w = 64;
    ArtifactSpec artifact;
    std::uint64_t seed = 0;
    std::string out_dir;
    double noise = 0.02;         // additive Gaussian pixel noise, shared by both classes
    double contrast_lo = 0.8;    // per-image contrast jitter range
    double contrast_hi = 1.2;
};

struct ManifestEntry {
    std::string path;   // relative to the manifest directory
    int label = 0;      // real=0, fake=1
    std::string split;  // train | val | test
};

struct Manifest {
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::vector<ManifestEntry> entries;
};

// CSV with header `path,label,split`; a `# seed=N` first line when present.
// load -> save is a byte-level fixed point.
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

// Writes PGMs under out_dir/{real,fake}/ plus out_dir/manifest.csv. The fake
// class reuses the real class's per-image field and differs only by the
// injected frequency-domain artifact. Splits are hashed from (seed, index).
Manifest generate_dataset(const GeneratorOptions& opt);

struct Dataset {
    std::size_t channels = 0, h = 0, w = 0;
    std::vector<Tensor> images;  // [C,H,W] each, uniform dims
    std::vector<int> labels;     // real=0, fake=1
};

// Loads every manifest entry of one split from dir/manifest.csv.
Dataset load_split(const std::string& dir, const std::string& split);

// [N,channels,H,W] batch from dataset rows, replicating grayscale on demand.
Tensor make_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                  std::size_t channels);

}  // namespace specx
