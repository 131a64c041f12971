#include "updm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace updm {

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(buf, bits);
}

void put_str(std::string& buf, const std::string& s) {
    put_u32(buf, static_cast<std::uint32_t>(s.size()));
    buf.append(s);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("updm: truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string encode_payload(const Checkpoint& c) {
    std::string payload;
    put_str(payload, c.prov.stage);
    put_u64(payload, c.prov.seed);
    put_str(payload, c.prov.config_hash);
    put_str(payload, c.prov.parent_hash);
    put_str(payload, c.meta_json);
    put_u32(payload, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, t] : c.tensors) {
        put_str(payload, name);
        put_u32(payload, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u32(payload, static_cast<std::uint32_t>(d));
        for (double v : *t.data) put_f64(payload, v);
    }
    return payload;
}

}  // namespace

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    const std::string payload = encode_payload(*this);
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, static_cast<std::uint64_t>(payload.size()));
    out.append(payload);
    put_u64(out, fnv1a64(payload.data(), payload.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("updm: cannot open '" + path.string() + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("updm: failed to write '" + path.string() + "'");
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("updm: cannot open '" + path.string() + "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw std::runtime_error("updm: '" + path.string() + "' is not a UPDM checkpoint");
    }
    Reader r{buf, 4};
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw std::runtime_error("updm: checkpoint version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kVersion) + ")");
    }
    const std::uint64_t payload_size = r.u64();
    r.need(payload_size + 8);
    const std::size_t payload_start = r.pos;
    const std::uint64_t stored_hash =
        [&] { Reader tail{buf, payload_start + payload_size}; return tail.u64(); }();
    if (fnv1a64(buf.data() + payload_start, payload_size) != stored_hash) {
        throw std::runtime_error("updm: checkpoint '" + path.string() + "' is corrupted (hash mismatch)");
    }

    Checkpoint c;
    c.prov.stage = r.str();
    c.prov.seed = r.u64();
    c.prov.config_hash = r.str();
    c.prov.parent_hash = r.str();
    c.meta_json = r.str();
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = r.str();
        const std::uint32_t ndim = r.u32();
        std::vector<int> shape;
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            shape.push_back(static_cast<int>(r.u32()));
            n *= static_cast<std::size_t>(shape.back());
        }
        std::vector<double> values(n);
        for (std::size_t v = 0; v < n; ++v) values[v] = r.f64();
        c.tensors.emplace_back(name, Tensor::from_values(std::move(shape), std::move(values)));
    }
    return c;
}

std::string Checkpoint::content_hash() const {
    const std::string payload = encode_payload(*this);
    return hash_hex(fnv1a64(payload.data(), payload.size()));
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw std::runtime_error("updm: checkpoint has no tensor named '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return true;
    }
    return false;
}

}  // namespace updm
