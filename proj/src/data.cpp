#include "specx/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "specx/fft.hpp"
#include "specx/rng.hpp"

namespace specx {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

[[noreturn]] void fail_at(const std::string& path, std::size_t offset, const std::string& what) {
    throw std::runtime_error(path + ": " + what + " at byte " + std::to_string(offset));
}

// PNM header scanner: tokens separated by whitespace, '#' comments run to end
// of line. Exactly one whitespace byte separates the maxval from the payload.
class PnmReader {
  public:
    PnmReader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    std::string magic() {
        if (data_.size() < 2) fail_at(path_, 0, "not a PNM file (too short)");
        return data_.substr(0, 2);
    }

    long token_int() {
        skip_space_and_comments();
        if (pos_ >= data_.size()) fail_at(path_, pos_, "unexpected end of header");
        if (!std::isdigit(static_cast<unsigned char>(data_[pos_])))
            fail_at(path_, pos_, "expected an integer header field");
        long v = 0;
        while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
            v = v * 10 + (data_[pos_] - '0');
            if (v > 1 << 30) fail_at(path_, pos_, "header field out of range");
            ++pos_;
        }
        return v;
    }

    const unsigned char* payload(std::size_t n) {
        if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_])))
            fail_at(path_, pos_, "expected single whitespace before payload");
        ++pos_;
        if (pos_ + n > data_.size())
            fail_at(path_, data_.size(),
                    "truncated payload (need " + std::to_string(n) + " bytes, have " +
                        std::to_string(data_.size() - pos_) + ")");
        if (pos_ + n < data_.size()) fail_at(path_, pos_ + n, "trailing bytes after payload");
        return reinterpret_cast<const unsigned char*>(data_.data()) + pos_;
    }

    void advance(std::size_t n) { pos_ += n; }
    std::size_t pos() const { return pos_; }
    const std::string& path() const { return path_; }

  private:
    void skip_space_and_comments() {
        while (pos_ < data_.size()) {
            unsigned char c = static_cast<unsigned char>(data_[pos_]);
            if (std::isspace(c)) {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

double to_unit(std::uint64_t u) { return static_cast<double>(u >> 11) * 0x1.0p-53; }

Tensor blur_circular(const Tensor& x) {
    // fixed low-pass: separable binomial kernel of order 8, circular padding,
    // so the field's spectrum decays monotonically from DC
    static const double k[9] = {1 / 256.0, 8 / 256.0,  28 / 256.0, 56 / 256.0, 70 / 256.0,
                                56 / 256.0, 28 / 256.0, 8 / 256.0,  1 / 256.0};
    const std::size_t h = x.shape[1], w = x.shape[2];
    Tensor rows({1, h, w}), out({1, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t c = 0; c < w; ++c) {
            double s = 0.0;
            for (int j = 0; j < 9; ++j)
                s += k[j] * x.data[y * w + (c + w + static_cast<std::size_t>(j) - 4) % w];
            rows.data[y * w + c] = s;
        }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t c = 0; c < w; ++c) {
            double s = 0.0;
            for (int j = 0; j < 9; ++j)
                s += k[j] * rows.data[((y + h + static_cast<std::size_t>(j) - 4) % h) * w + c];
            out.data[y * w + c] = s;
        }
    return out;
}

Tensor clamp01(Tensor t) {
    for (double& v : t.data) v = std::min(1.0, std::max(0.0, v));
    return t;
}

// Smoothed random field around 0.5 with per-image contrast jitter and shared
// pixel noise; left unclamped so artifact injection sees the raw field.
Tensor make_field(Rng& rng, const GeneratorOptions& opt) {
    Tensor u({1, opt.h, opt.w});
    for (double& v : u.data) v = rng.uniform();
    Tensor f = blur_circular(u);
    const double contrast = rng.uniform(opt.contrast_lo, opt.contrast_hi);
    // the blur shrinks the deviation roughly 5x; rescale to a usable range
    const double gain = 4.0 * contrast;
    for (double& v : f.data) v = 0.5 + (v - 0.5) * gain;
    if (opt.noise > 0.0)
        for (double& v : f.data) v += opt.noise * rng.normal();
    return f;
}

// Adds amp*e^{i*phase} at wrapped bin (du,dv) plus the conjugate at the mirror
// bin, keeping the spatial signal real. Self-conjugate bins take the real part.
void add_peak(ComplexGrid& f, long du, long dv, double amp, double phase) {
    const long h = static_cast<long>(f.height), w = static_cast<long>(f.width);
    const std::size_t u = static_cast<std::size_t>(((du % h) + h) % h);
    const std::size_t v = static_cast<std::size_t>(((dv % w) + w) % w);
    const std::size_t mu = (f.height - u) % f.height, mv = (f.width - v) % f.width;
    if (mu == u && mv == v) {
        f.re[f.idx(0, u, v)] += amp * std::cos(phase);
        return;
    }
    f.re[f.idx(0, u, v)] += amp * std::cos(phase);
    f.im[f.idx(0, u, v)] += amp * std::sin(phase);
    f.re[f.idx(0, mu, mv)] += amp * std::cos(phase);
    f.im[f.idx(0, mu, mv)] -= amp * std::sin(phase);
}

Tensor inject_artifact(const Tensor& pre, const ArtifactSpec& art, Rng& rng) {
    if (art.amp <= 0.0) return clamp01(pre);
    const std::size_t h = pre.shape[1], w = pre.shape[2];
    ComplexGrid f = fft2(pre);
    // amp*HW/2 per conjugate pair makes the spatial cosine's amplitude == amp
    const double a = art.amp * static_cast<double>(h * w) / 2.0;
    const long k = art.freq;
    if (art.mode == "grid") {
        for (auto [du, dv] : {std::pair<long, long>{0, k}, {k, 0}})
            add_peak(f, du, dv, a, art.phase_jitter * rng.uniform(0.0, kTwoPi));
    } else if (art.mode == "radial-peaks") {
        const int peaks = 8;
        const double rot = art.phase_jitter * rng.uniform(0.0, kTwoPi / peaks);
        for (int j = 0; j < peaks; ++j) {
            const double theta = rot + j * (kTwoPi / 2.0) / peaks;  // mirrors fill [pi,2pi)
            const long du = std::lround(k * std::sin(theta));
            const long dv = std::lround(k * std::cos(theta));
            if (du == 0 && dv == 0) continue;
            add_peak(f, du, dv, a, art.phase_jitter * rng.uniform(0.0, kTwoPi));
        }
    } else if (art.mode == "checkerboard-upsample") {
        const long hh = static_cast<long>(h) / 2, hw = static_cast<long>(w) / 2;
        for (auto [du, dv] : {std::pair<long, long>{hh, 0}, {0, hw}, {hh, hw}}) {
            const double sign =
                art.phase_jitter > 0.0 ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : 1.0;
            add_peak(f, du, dv, sign * a, 0.0);
        }
    } else {
        throw std::invalid_argument("generator: unknown artifact mode " + art.mode);
    }
    return clamp01(ifft2(f));
}

void validate_generator(const GeneratorOptions& opt) {
    if (opt.n_per_class < 2) throw std::invalid_argument("generator: need n >= 2 per class");
    if (opt.h < 4 || opt.w < 4) throw std::invalid_argument("generator: image dims too small");
    if (opt.out_dir.empty()) throw std::invalid_argument("generator: empty output directory");
    if (opt.artifact.amp < 0.0) throw std::invalid_argument("generator: negative amplitude");
    if (!(opt.contrast_lo > 0.0 && opt.contrast_hi >= opt.contrast_lo))
        throw std::invalid_argument("generator: bad contrast range");
    if (opt.noise < 0.0) throw std::invalid_argument("generator: negative noise");
    const std::string& mode = opt.artifact.mode;
    if (mode == "grid" || mode == "radial-peaks") {
        const int nyq = static_cast<int>(std::min(opt.h, opt.w)) / 2;
        if (opt.artifact.freq < 1 || opt.artifact.freq >= nyq)
            throw std::invalid_argument("generator: freq " + std::to_string(opt.artifact.freq) +
                                        " outside [1," + std::to_string(nyq) + ")");
    } else if (mode == "checkerboard-upsample") {
        if (opt.h % 2 || opt.w % 2)
            throw std::invalid_argument("generator: checkerboard-upsample needs even dims");
    } else {
        throw std::invalid_argument("generator: unknown artifact mode " + mode);
    }
}

std::string image_name(int cls, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%05d.pgm", i);
    return std::string(cls == 0 ? "real/" : "fake/") + buf;
}

}  // namespace

Tensor load_image(const std::string& path) {
    PnmReader r(read_file(path), path);
    const std::string magic = r.magic();
    if (magic != "P5" && magic != "P6") fail_at(path, 0, "unsupported magic '" + magic + "'");
    r.advance(2);
    const long w = r.token_int();
    const long h = r.token_int();
    const long maxval = r.token_int();
    if (w < 1 || h < 1) fail_at(path, r.pos(), "bad dimensions");
    if (maxval != 255)
        fail_at(path, r.pos(), "unsupported maxval " + std::to_string(maxval) + " (only 255)");
    const std::size_t c = magic == "P5" ? 1 : 3;
    const std::size_t hw = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    const unsigned char* bytes = r.payload(c * hw);
    Tensor out({c, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    if (c == 1) {
        for (std::size_t i = 0; i < hw; ++i) out.data[i] = bytes[i] / 255.0;
    } else {
        for (std::size_t i = 0; i < hw; ++i)  // interleaved RGB to planes
            for (std::size_t ch = 0; ch < 3; ++ch) out.data[ch * hw + i] = bytes[3 * i + ch] / 255.0;
    }
    return out;
}

void save_image(const std::string& path, const Tensor& image) {
    require_rank(image, 3, "save_image");
    const std::size_t c = image.shape[0], h = image.shape[1], w = image.shape[2];
    if (c != 1 && c != 3)
        throw std::invalid_argument("save_image: need 1 or 3 channels, got " +
                                    shape_str(image.shape));
    std::string buf = c == 1 ? "P5" : "P6";
    buf += "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    const std::size_t hw = h * w;
    for (std::size_t i = 0; i < hw; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            double v = std::min(1.0, std::max(0.0, image.data[ch * hw + i]));
            buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_image: cannot open " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("save_image: write failed for " + path);
}

Tensor expand_channels(const Tensor& image, std::size_t channels) {
    require_rank(image, 3, "expand_channels");
    if (image.shape[0] == channels) return image;
    if (image.shape[0] != 1)
        throw std::invalid_argument("expand_channels: cannot map " + shape_str(image.shape) +
                                    " to " + std::to_string(channels) + " channels");
    Tensor out({channels, image.shape[1], image.shape[2]});
    const std::size_t hw = image.shape[1] * image.shape[2];
    for (std::size_t c = 0; c < channels; ++c)
        std::copy(image.data.begin(), image.data.end(), out.data.begin() + c * hw);
    return out;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    Manifest m;
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string tag = "# seed=";
            if (lineno == 1 && line.rfind(tag, 0) == 0) {
                m.seed = std::stoull(line.substr(tag.size()));
                m.has_seed = true;
            }
            continue;
        }
        if (!saw_header) {
            if (line != "path,label,split")
                throw std::runtime_error(path + " line " + std::to_string(lineno) +
                                         ": expected header path,label,split");
            saw_header = true;
            continue;
        }
        std::istringstream row(line);
        std::string p, label, split;
        if (!std::getline(row, p, ',') || !std::getline(row, label, ',') ||
            !std::getline(row, split) || p.empty())
            throw std::runtime_error(path + " line " + std::to_string(lineno) + ": malformed row");
        if (label != "real" && label != "fake")
            throw std::runtime_error(path + " line " + std::to_string(lineno) + ": bad label " +
                                     label);
        if (split != "train" && split != "val" && split != "test")
            throw std::runtime_error(path + " line " + std::to_string(lineno) + ": bad split " +
                                     split);
        if (!seen.insert(p).second)
            throw std::runtime_error(path + " line " + std::to_string(lineno) +
                                     ": duplicate path " + p);
        m.entries.push_back({p, label == "fake" ? 1 : 0, split});
    }
    if (!saw_header) throw std::runtime_error(path + ": missing header");
    return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
    std::string buf;
    if (m.has_seed) buf += "# seed=" + std::to_string(m.seed) + "\n";
    buf += "path,label,split\n";
    for (const ManifestEntry& e : m.entries)
        buf += e.path + "," + (e.label ? "fake" : "real") + "," + e.split + "\n";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("manifest: cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("manifest: write failed for " + path);
}

Manifest generate_dataset(const GeneratorOptions& opt) {
    validate_generator(opt);
    namespace fs = std::filesystem;
    std::error_code ec;
    for (const char* sub : {"", "/real", "/fake"}) {
        fs::create_directories(opt.out_dir + sub, ec);
        if (ec)
            throw std::runtime_error("generator: cannot create " + opt.out_dir + sub + ": " +
                                     ec.message());
    }

    Manifest m;
    m.seed = opt.seed;
    m.has_seed = true;
    int train_count[2] = {0, 0};
    for (int cls = 0; cls < 2; ++cls) {
        for (int i = 0; i < opt.n_per_class; ++i) {
            // both classes rebuild the same field from the shared stream; the
            // fake class then differs only by the injected peaks
            Rng field_rng(hash_mix(opt.seed, static_cast<std::uint64_t>(i), 10));
            Tensor pre = make_field(field_rng, opt);
            Tensor img;
            if (cls == 0) {
                img = clamp01(std::move(pre));
            } else {
                Rng art_rng(hash_mix(opt.seed, static_cast<std::uint64_t>(i), 20));
                img = inject_artifact(pre, opt.artifact, art_rng);
            }
            const std::string rel = image_name(cls, i);
            save_image(opt.out_dir + "/" + rel, img);
            const std::uint64_t gidx =
                static_cast<std::uint64_t>(cls) * static_cast<std::uint64_t>(opt.n_per_class) +
                static_cast<std::uint64_t>(i);
            const double u = to_unit(hash_mix(opt.seed, gidx, 30));
            const std::string split = u < 0.70 ? "train" : (u < 0.85 ? "val" : "test");
            if (split == "train") ++train_count[cls];
            m.entries.push_back({rel, cls, split});
        }
    }
    if (train_count[0] == 0 || train_count[1] == 0)
        throw std::runtime_error("generator: train split is missing a class; use a larger n");
    save_manifest(m, opt.out_dir + "/manifest.csv");
    return m;
}

Dataset load_split(const std::string& dir, const std::string& split) {
    if (split != "train" && split != "val" && split != "test")
        throw std::invalid_argument("dataset: bad split " + split);
    Manifest m = load_manifest(dir + "/manifest.csv");
    Dataset ds;
    for (const ManifestEntry& e : m.entries) {
        if (e.split != split) continue;
        Tensor img = load_image(dir + "/" + e.path);
        if (ds.images.empty()) {
            ds.channels = img.shape[0];
            ds.h = img.shape[1];
            ds.w = img.shape[2];
        } else if (img.shape[0] != ds.channels || img.shape[1] != ds.h || img.shape[2] != ds.w) {
            throw std::runtime_error("dataset: " + e.path + " is " + shape_str(img.shape) +
                                     ", expected uniform " + shape_str({ds.channels, ds.h, ds.w}));
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(e.label);
    }
    if (ds.images.empty())
        throw std::runtime_error("dataset: split " + split + " of " + dir + " is empty");
    return ds;
}

Tensor make_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                  std::size_t channels) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
    Tensor out({indices.size(), channels, ds.h, ds.w});
    const std::size_t chw = channels * ds.h * ds.w;
    for (std::size_t n = 0; n < indices.size(); ++n) {
        if (indices[n] >= ds.images.size())
            throw std::invalid_argument("make_batch: index " + std::to_string(indices[n]) +
                                        " out of range");
        Tensor img = expand_channels(ds.images[indices[n]], channels);
        std::copy(img.data.begin(), img.data.end(), out.data.begin() + n * chw);
    }
    return out;
}

}  // namespace specx
