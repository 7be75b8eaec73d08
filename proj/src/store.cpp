#include "probembed/store.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "binio.hpp"

namespace probembed {

namespace {
constexpr char kStoreMagic[4] = {'P', 'G', 'E', 'S'};
constexpr std::uint32_t kStoreVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
constexpr double kReadSlack = 1e-6;

void validate_store(const EmbeddingStore& s) {
    if (s.mu.size() != s.count() * s.dim || s.log_var.size() != s.count() * s.dim) {
        throw std::runtime_error("store arrays do not match count x dim");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : s.ids) {
        if (!seen.insert(id).second) throw std::runtime_error("duplicate id in store: " + id);
    }
    for (float lv : s.log_var) {
        if (!(lv >= kLogVarMin - kReadSlack && lv <= kLogVarMax + kReadSlack)) {
            throw std::runtime_error("log_var outside [-6, 6] in store");
        }
    }
}
}  // namespace

void EmbeddingStore::append(const std::string& id, const GaussianEmbedding& z) {
    if (count() == 0 && dim == 0) dim = z.dim();
    if (z.dim() != dim) throw std::invalid_argument("EmbeddingStore::append: dimension mismatch");
    ids.push_back(id);
    for (double m : z.mu) mu.push_back(static_cast<float>(m));
    for (double lv : z.log_var) log_var.push_back(static_cast<float>(lv));
}

GaussianEmbedding EmbeddingStore::embedding(std::size_t index) const {
    std::vector<double> m(dim), lv(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        m[d] = static_cast<double>(mu[index * dim + d]);
        lv[d] = static_cast<double>(log_var[index * dim + d]);
    }
    return GaussianEmbedding(std::move(m), lv);
}

std::vector<GaussianEmbedding> EmbeddingStore::embeddings() const {
    std::vector<GaussianEmbedding> out;
    out.reserve(count());
    for (std::size_t i = 0; i < count(); ++i) out.push_back(embedding(i));
    return out;
}

void write_store(const EmbeddingStore& store, const std::string& path) {
    validate_store(store);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_store: cannot open " + path);
    try {
        binio::write_bytes(out, kStoreMagic, 4);
        binio::write_pod<std::uint32_t>(out, kStoreVersion);
        binio::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim));
        binio::write_pod<std::uint64_t>(out, store.count());
        binio::write_pod<std::uint8_t>(out, kDtypeF32);
        for (const auto& id : store.ids) binio::write_string(out, id);
        binio::write_f32_array(out, store.mu);
        binio::write_f32_array(out, store.log_var);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " [" + path + "]");
    }
    out.close();
    if (!out) throw std::runtime_error("write_store: I/O failure [" + path + "]");
}

EmbeddingStore read_store(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_store: cannot open " + path);
    try {
        char magic[4];
        binio::read_bytes(in, magic, 4);
        if (std::string(magic, 4) != std::string(kStoreMagic, 4)) {
            throw std::runtime_error("bad magic, not an embedding store");
        }
        EmbeddingStore s;
        s.version = binio::read_pod<std::uint32_t>(in);
        if (s.version != kStoreVersion) {
            throw std::runtime_error("unsupported store version " + std::to_string(s.version));
        }
        s.dim = binio::read_pod<std::uint32_t>(in);
        const auto count = binio::read_pod<std::uint64_t>(in);
        const auto dtype = binio::read_pod<std::uint8_t>(in);
        if (dtype != kDtypeF32) {
            throw std::runtime_error("unsupported dtype flag " + std::to_string(dtype));
        }
        s.ids.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) s.ids.push_back(binio::read_string(in));
        s.mu = binio::read_f32_array(in, count * s.dim);
        s.log_var = binio::read_f32_array(in, count * s.dim);
        // trailing garbage means the file is not what the header claims
        char extra;
        in.read(&extra, 1);
        if (in.gcount() != 0) throw std::runtime_error("trailing bytes after store payload");
        validate_store(s);
        return s;
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " [" + path + "]");
    }
}

}  // namespace probembed
