#include "specx/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace specx {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'X', 'C'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& buf, T v) {
    unsigned char b[sizeof(T)];
    // serialize little-endian regardless of host order
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    buf.append(reinterpret_cast<const char*>(b), sizeof(T));
}

void put_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put(buf, bits);
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put(buf, bits);
}

class Reader {
  public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return v;
    }

    double get_f64() {
        std::uint64_t bits = get<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    float get_f32() {
        std::uint32_t bits = get<std::uint32_t>();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string get_str(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == data_.size(); }
    std::size_t pos() const { return pos_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error(path_ + ": " + what + " at byte " + std::to_string(pos_));
    }

  private:
    void need(std::size_t n) {
        if (pos_ + n > data_.size()) fail("truncated (need " + std::to_string(n) + " more bytes)");
    }

    std::string data_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const std::string& meta, const ParamList& params,
                     const std::string& dtype) {
    if (dtype != "f64" && dtype != "f32")
        throw std::invalid_argument("checkpoint: dtype must be f64 or f32, got " + dtype);
    const bool wide = dtype == "f64";
    std::string buf;
    buf.append(kMagic, 4);
    put<std::uint32_t>(buf, kVersion);
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(meta.size()));
    buf += meta;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
    for (const ParamRef& p : params) {
        if (p.name.size() > 0xffff)
            throw std::invalid_argument("checkpoint: name too long: " + p.name);
        put<std::uint16_t>(buf, static_cast<std::uint16_t>(p.name.size()));
        buf += p.name;
        buf.push_back(wide ? 0 : 1);
        buf.push_back(static_cast<char>(p.tensor->rank()));
        for (std::size_t d : p.tensor->shape) put<std::uint64_t>(buf, static_cast<std::uint64_t>(d));
        if (wide)
            for (double v : p.tensor->data) put_f64(buf, v);
        else
            for (double v : p.tensor->data) put_f32(buf, static_cast<float>(v));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(data), path);

    if (r.get_str(4) != std::string(kMagic, 4)) r.fail("bad magic");
    const std::uint32_t version = r.get<std::uint32_t>();
    if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.meta = r.get_str(r.get<std::uint32_t>());
    const std::uint32_t count = r.get<std::uint32_t>();
    ckpt.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.get_str(r.get<std::uint16_t>());
        const unsigned dtype = r.get<std::uint8_t>();
        if (dtype > 1) r.fail("unknown dtype tag " + std::to_string(dtype));
        const unsigned rank = r.get<std::uint8_t>();
        std::vector<std::size_t> shape(rank);
        for (unsigned d = 0; d < rank; ++d)
            shape[d] = static_cast<std::size_t>(r.get<std::uint64_t>());
        Tensor t(shape);
        for (double& v : t.data) v = dtype == 0 ? r.get_f64() : static_cast<double>(r.get_f32());
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (!r.done()) r.fail("trailing bytes");
    return ckpt;
}

void load_into(const Checkpoint& ckpt, const ParamList& params) {
    std::map<std::string, Tensor*> by_name;
    for (const ParamRef& p : params)
        if (!by_name.emplace(p.name, p.tensor).second)
            throw std::invalid_argument("checkpoint: duplicate parameter name " + p.name);
    std::map<std::string, const Tensor*> stored;
    for (const auto& [name, t] : ckpt.tensors)
        if (!stored.emplace(name, &t).second)
            throw std::runtime_error("checkpoint: duplicate stored tensor " + name);

    for (const ParamRef& p : params) {
        auto it = stored.find(p.name);
        if (it == stored.end())
            throw std::runtime_error("checkpoint: missing tensor " + p.name);
        if (!it->second->same_shape(*p.tensor))
            throw std::runtime_error("checkpoint: tensor " + p.name + " has shape " +
                                     shape_str(it->second->shape) + ", expected " +
                                     shape_str(p.tensor->shape));
        p.tensor->data = it->second->data;
    }
    for (const auto& [name, t] : ckpt.tensors)
        if (!by_name.count(name))
            throw std::runtime_error("checkpoint: unexpected tensor " + name);
}

}  // namespace specx
