#pragma once

// Binary file formats, all little-endian with a 4-byte magic and a u32
// version:
//
//   features   "QCFV": u32 N, u32 D, then N*D float32 row-major
//   labels     "QCLB": u32 N, then N u32 cluster ids
//   clusters   "QCCD": u32 count, u32 k, u8 has_masks, then per instance
//              u32 center, k*u32 members, k*f64 sims, and k*u8 mask bytes
//              when has_masks is 1
//   checkpoint "QCKP": the train config, epoch, Adam step count, RNG state,
//              then every tensor as (u32 name_len, name, u32 rank, u32 dims[],
//              f64 values) in a fixed order, ending with adam.m and adam.v
//
// Readers parse from a fully loaded buffer and fail with the byte offset on
// truncation. Writers serialize to memory and publish via rename so a failed
// write never leaves a partial file behind.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "qclus/clusterset.hpp"
#include "qclus/errors.hpp"
#include "qclus/trainer.hpp"
#include "qclus/util.hpp"

namespace qclus {

namespace detail {

class ByteReader {
public:
    ByteReader(std::vector<unsigned char> bytes, std::string origin)
        : buf_(std::move(bytes)), origin_(std::move(origin)) {}

    std::uint8_t u8() {
        need(1);
        return buf_[pos_++];
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string str(std::size_t len) {
        need(len);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
        pos_ += len;
        return s;
    }

    void expect_magic(const char* magic) {
        const std::size_t at = pos_;
        const std::string got = str(4);
        if (got != magic) {
            throw format_error(origin_ + ": bad magic at offset " + std::to_string(at) +
                               ", expected " + magic);
        }
    }

    void finish() {
        if (pos_ != buf_.size()) {
            throw format_error(origin_ + ": " + std::to_string(buf_.size() - pos_) +
                               " trailing bytes at offset " + std::to_string(pos_));
        }
    }

    std::size_t offset() const { return pos_; }

    [[noreturn]] void fail(const std::string& why) {
        throw format_error(origin_ + ": " + why + " at offset " + std::to_string(pos_));
    }

private:
    void need(std::size_t n) {
        if (buf_.size() - pos_ < n) {
            throw format_error(origin_ + ": truncated at offset " +
                               std::to_string(buf_.size()) + ", needed " +
                               std::to_string(pos_ + n) + " bytes");
        }
    }

    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
    std::string origin_;
};

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
        }
    }

    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
        }
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void str(const std::string& s) {
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    const std::vector<unsigned char>& bytes() const { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw format_error(path + ": cannot open for reading");
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw format_error(path + ": read failed");
    }
    return bytes;
}

inline void write_file_atomic(const std::string& path,
                              std::span<const unsigned char> bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw format_error(tmp + ": cannot open for writing");
        }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw format_error(tmp + ": write failed");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw format_error(path + ": rename failed: " + ec.message());
    }
}

} // namespace detail

inline std::uint64_t hash_file(const std::string& path) {
    const auto bytes = detail::read_file_bytes(path);
    return fnv1a64(std::span<const unsigned char>(bytes));
}

inline void write_text_atomic(const std::string& path, const std::string& text) {
    detail::write_file_atomic(
        path, std::span<const unsigned char>(
                  reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

// ---- features ----------------------------------------------------------------

inline void write_features(const std::string& path, const FeatureSet& f) {
    if (f.size() == 0 || f.dim() == 0) {
        throw contract_error("write_features: empty feature set");
    }
    detail::ByteWriter w;
    w.str("QCFV");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(f.size()));
    w.u32(static_cast<std::uint32_t>(f.dim()));
    for (double v : f.features.data()) {
        w.f32(static_cast<float>(v));
    }
    detail::write_file_atomic(path, w.bytes());
}

inline FeatureSet read_features(const std::string& path) {
    detail::ByteReader r(detail::read_file_bytes(path), path);
    r.expect_magic("QCFV");
    if (const auto ver = r.u32(); ver != 1) {
        r.fail("unsupported feature file version " + std::to_string(ver));
    }
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    if (n == 0 || d == 0) {
        r.fail("empty feature file (N=" + std::to_string(n) +
               ", D=" + std::to_string(d) + ")");
    }
    FeatureSet f;
    f.features = Matrix(n, d);
    for (double& v : f.features.data()) {
        v = static_cast<double>(r.f32());
    }
    r.finish();
    return f;
}

// ---- labels --------------------------------------------------------------------

inline void write_labels(const std::string& path, const LabelVector& labels) {
    if (labels.empty()) {
        throw contract_error("write_labels: empty label vector");
    }
    detail::ByteWriter w;
    w.str("QCLB");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(labels.size()));
    for (std::uint32_t l : labels) {
        w.u32(l);
    }
    detail::write_file_atomic(path, w.bytes());
}

inline LabelVector read_labels(const std::string& path) {
    detail::ByteReader r(detail::read_file_bytes(path), path);
    r.expect_magic("QCLB");
    if (const auto ver = r.u32(); ver != 1) {
        r.fail("unsupported label file version " + std::to_string(ver));
    }
    const std::uint32_t n = r.u32();
    if (n == 0) {
        r.fail("empty label file");
    }
    LabelVector labels(n);
    for (auto& l : labels) {
        l = r.u32();
    }
    r.finish();
    return labels;
}

// ---- cluster datasets ------------------------------------------------------------

inline void write_clusters(const std::string& path,
                           const std::vector<ClusterInstance>& clusters) {
    if (clusters.empty()) {
        throw contract_error("write_clusters: no instances");
    }
    const std::size_t k = clusters[0].members.size();
    const bool has_masks = !clusters[0].mask.empty();
    for (const auto& c : clusters) {
        if (c.members.size() != k || c.sims.size() != k) {
            throw contract_error("write_clusters: ragged instance sizes");
        }
        if (c.mask.size() != (has_masks ? k : 0)) {
            throw contract_error("write_clusters: masks must be present on all "
                                 "instances or none");
        }
        if (c.members[0] != c.center) {
            throw contract_error("write_clusters: members[0] must be the center");
        }
    }
    detail::ByteWriter w;
    w.str("QCCD");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(clusters.size()));
    w.u32(static_cast<std::uint32_t>(k));
    w.u8(has_masks ? 1 : 0);
    for (const auto& c : clusters) {
        w.u32(c.center);
        for (std::uint32_t m : c.members) {
            w.u32(m);
        }
        for (double s : c.sims) {
            w.f64(s);
        }
        if (has_masks) {
            for (std::uint8_t m : c.mask) {
                w.u8(m);
            }
        }
    }
    detail::write_file_atomic(path, w.bytes());
}

inline std::vector<ClusterInstance> read_clusters(const std::string& path) {
    detail::ByteReader r(detail::read_file_bytes(path), path);
    r.expect_magic("QCCD");
    if (const auto ver = r.u32(); ver != 1) {
        r.fail("unsupported cluster file version " + std::to_string(ver));
    }
    const std::uint32_t count = r.u32();
    const std::uint32_t k = r.u32();
    if (count == 0 || k == 0) {
        r.fail("empty cluster file");
    }
    const std::uint8_t has_masks = r.u8();
    if (has_masks > 1) {
        r.fail("mask flag must be 0 or 1");
    }
    std::vector<ClusterInstance> clusters(count);
    for (auto& c : clusters) {
        c.center = r.u32();
        c.members.resize(k);
        for (auto& m : c.members) {
            m = r.u32();
        }
        if (c.members[0] != c.center) {
            r.fail("members[0] != center on instance " + std::to_string(c.center));
        }
        c.sims.resize(k);
        for (auto& s : c.sims) {
            s = r.f64();
        }
        if (has_masks) {
            c.mask.resize(k);
            for (auto& m : c.mask) {
                m = r.u8();
                if (m > 1) {
                    r.fail("mask bytes must be 0 or 1");
                }
            }
        }
    }
    r.finish();
    return clusters;
}

// ---- checkpoints --------------------------------------------------------------------

namespace detail {

inline void write_tensor(ByteWriter& w, const std::string& name,
                         std::span<const std::uint32_t> dims,
                         std::span<const double> values) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.str(name);
    w.u32(static_cast<std::uint32_t>(dims.size()));
    std::size_t expect = 1;
    for (std::uint32_t d : dims) {
        w.u32(d);
        expect *= d;
    }
    if (expect != values.size()) {
        throw contract_error("write_tensor: dims do not match value count for " + name);
    }
    for (double v : values) {
        w.f64(v);
    }
}

inline void read_tensor_into(ByteReader& r, const std::string& want_name,
                             std::span<const std::uint32_t> want_dims,
                             std::span<double> into) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    if (name != want_name) {
        r.fail("expected tensor " + want_name + ", found " + name);
    }
    const std::uint32_t rank = r.u32();
    if (rank != want_dims.size()) {
        r.fail("tensor " + name + ": rank " + std::to_string(rank) + ", expected " +
               std::to_string(want_dims.size()));
    }
    std::size_t total = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32();
        if (d != want_dims[i]) {
            r.fail("tensor " + name + ": dim " + std::to_string(i) + " is " +
                   std::to_string(d) + ", expected " + std::to_string(want_dims[i]));
        }
        total *= d;
    }
    if (total != into.size()) {
        r.fail("tensor " + name + ": size mismatch");
    }
    for (double& v : into) {
        v = r.f64();
    }
}

// The dims advertised for each named tensor, matching tensor_refs order.
inline std::vector<std::uint32_t> tensor_dims(const std::string& name,
                                              const EncoderParams& p,
                                              std::size_t flat_size) {
    if (name == "w_e") {
        return {static_cast<std::uint32_t>(p.w_e.rows()),
                static_cast<std::uint32_t>(p.w_e.cols())};
    }
    return {static_cast<std::uint32_t>(flat_size)};
}

} // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    ck.config.validate();
    detail::ByteWriter w;
    w.str("QCKP");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(ck.config.k));
    w.u32(static_cast<std::uint32_t>(ck.config.n_qubits));
    w.u32(static_cast<std::uint32_t>(ck.config.depth));
    w.u32(static_cast<std::uint32_t>(ck.config.blocks));
    w.u32(static_cast<std::uint32_t>(ck.config.sharing));
    w.u32(static_cast<std::uint32_t>(ck.config.fusion));
    w.f64(ck.config.lr);
    w.u32(static_cast<std::uint32_t>(ck.config.epochs));
    w.u32(static_cast<std::uint32_t>(ck.config.batch_size));
    w.u64(ck.config.seed);
    w.f64(ck.config.tau);
    w.f64(ck.config.pos_weight);
    w.u32(static_cast<std::uint32_t>(ck.input_dim));
    w.u32(static_cast<std::uint32_t>(ck.epoch));
    w.u64(ck.opt.t);
    w.u32(static_cast<std::uint32_t>(ck.rng_state.size()));
    w.str(ck.rng_state);

    const auto refs = tensor_refs(ck.params);
    const std::size_t total = tensor_size_total(ck.params);
    if (ck.opt.m.size() != total || ck.opt.v.size() != total) {
        throw contract_error("write_checkpoint: optimizer state size mismatch");
    }
    w.u32(static_cast<std::uint32_t>(refs.size() + 2));
    for (const auto& r : refs) {
        detail::write_tensor(w, r.name, detail::tensor_dims(r.name, ck.params, r.data.size()),
                             r.data);
    }
    const std::uint32_t mdims[1] = {static_cast<std::uint32_t>(total)};
    detail::write_tensor(w, "adam.m", mdims, ck.opt.m);
    detail::write_tensor(w, "adam.v", mdims, ck.opt.v);
    detail::write_file_atomic(path, w.bytes());
}

inline Checkpoint read_checkpoint(const std::string& path) {
    detail::ByteReader r(detail::read_file_bytes(path), path);
    r.expect_magic("QCKP");
    if (const auto ver = r.u32(); ver != 1) {
        r.fail("unsupported checkpoint version " + std::to_string(ver));
    }
    Checkpoint ck;
    ck.config.k = r.u32();
    ck.config.n_qubits = r.u32();
    ck.config.depth = r.u32();
    ck.config.blocks = r.u32();
    const std::uint32_t sharing = r.u32();
    if (sharing > 2) {
        r.fail("sharing mode out of range");
    }
    ck.config.sharing = static_cast<SharingMode>(sharing);
    const std::uint32_t fusion = r.u32();
    if (fusion > 1) {
        r.fail("fusion mode out of range");
    }
    ck.config.fusion = static_cast<FusionMode>(fusion);
    ck.config.lr = r.f64();
    ck.config.epochs = r.u32();
    ck.config.batch_size = r.u32();
    ck.config.seed = r.u64();
    ck.config.tau = r.f64();
    ck.config.pos_weight = r.f64();
    ck.input_dim = r.u32();
    ck.epoch = r.u32();
    ck.config.validate();
    if (ck.input_dim == 0) {
        r.fail("input_dim must be >= 1");
    }

    const std::uint64_t adam_t = r.u64();
    const std::uint32_t rng_len = r.u32();
    ck.rng_state = r.str(rng_len);

    auto rng = make_rng(0);
    ck.params = init_encoder_params(ck.config.encoder(ck.input_dim), rng);
    const auto refs = tensor_refs(ck.params);
    const std::size_t total = tensor_size_total(ck.params);
    const std::uint32_t tensor_count = r.u32();
    if (tensor_count != refs.size() + 2) {
        r.fail("tensor count " + std::to_string(tensor_count) + ", expected " +
               std::to_string(refs.size() + 2));
    }
    for (const auto& ref : refs) {
        detail::read_tensor_into(r, ref.name,
                                 detail::tensor_dims(ref.name, ck.params, ref.data.size()),
                                 ref.data);
    }
    ck.opt.t = adam_t;
    ck.opt.m.resize(total);
    ck.opt.v.resize(total);
    const std::uint32_t mdims[1] = {static_cast<std::uint32_t>(total)};
    detail::read_tensor_into(r, "adam.m", mdims, ck.opt.m);
    detail::read_tensor_into(r, "adam.v", mdims, ck.opt.v);
    r.finish();
    return ck;
}

} // namespace qclus
