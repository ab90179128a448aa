#include "spdalign/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

#include "spdalign/error.hpp"

namespace spdalign {

struct Sha256::Impl {
    EVP_MD_CTX* ctx = nullptr;
    bool finished = false;
};

Sha256::Sha256() : impl_(std::make_unique<Impl>()) {
    impl_->ctx = EVP_MD_CTX_new();
    if (impl_->ctx == nullptr || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
        throw NumericalError("sha256: digest initialisation failed");
    }
}

Sha256::~Sha256() { EVP_MD_CTX_free(impl_->ctx); }

Sha256& Sha256::update(const void* data, std::size_t size) {
    if (impl_->finished) throw InvalidInput("sha256: update after digest");
    if (size > 0 && EVP_DigestUpdate(impl_->ctx, data, size) != 1) {
        throw NumericalError("sha256: update failed");
    }
    return *this;
}

Sha256& Sha256::update(std::string_view text) {
    update(static_cast<std::int64_t>(text.size()));
    return update(text.data(), text.size());
}

Sha256& Sha256::update(double value) { return update(&value, sizeof value); }

Sha256& Sha256::update(std::int64_t value) { return update(&value, sizeof value); }

Sha256& Sha256::update(const Eigen::MatrixXd& m) {
    update(static_cast<std::int64_t>(m.rows()));
    update(static_cast<std::int64_t>(m.cols()));
    return update(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
}

Sha256& Sha256::update(const Eigen::VectorXd& v) {
    update(static_cast<std::int64_t>(v.size()));
    return update(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

std::string Sha256::hex_digest() {
    if (impl_->finished) throw InvalidInput("sha256: digest already taken");
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(impl_->ctx, md.data(), &len) != 1) {
        throw NumericalError("sha256: finalisation failed");
    }
    impl_->finished = true;
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data.data(), data.size());
    return h.hex_digest();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex_digest();
}

}  // namespace spdalign
