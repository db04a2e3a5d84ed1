#include "cipherprint/cryptobox.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/provider.h>

#include <cstring>
#include <mutex>

namespace cipherprint {

namespace {

struct CipherInfo {
    std::string_view name;
    std::string_view openssl_name;
    CipherShape shape;
};

constexpr std::array<CipherInfo, kNumCiphers> kCipherTable = {{
    {"AES_ECB", "AES-128-ECB", {16, 0, 16, "ECB"}},
    {"AES_CBC", "AES-128-CBC", {16, 16, 16, "CBC"}},
    {"TDES_CBC", "DES-EDE3-CBC", {24, 8, 8, "CBC"}},
    {"BLOWFISH_CBC", "BF-CBC", {16, 8, 8, "CBC"}},
    {"CHACHA20", "ChaCha20", {32, 12, 1, "stream (RFC 8439, initial counter 1)"}},
    {"RC4", "RC4", {16, 0, 1, "stream (no keystream drop)"}},
}};

const CipherInfo& info_of(CipherLabel c) {
    auto idx = static_cast<int>(c);
    if (idx < 0 || idx >= kNumCiphers) throw std::invalid_argument("unknown cipher label");
    return kCipherTable[static_cast<std::size_t>(idx)];
}

// Legacy ciphers (BF, RC4) live in the legacy provider; loading any provider
// explicitly disables the implicit default, so both are loaded.
void ensure_providers() {
    static std::once_flag once;
    std::call_once(once, [] {
        OSSL_PROVIDER_load(nullptr, "default");
        OSSL_PROVIDER_load(nullptr, "legacy");
    });
}

const EVP_CIPHER* fetch_cipher(CipherLabel c) {
    ensure_providers();
    static std::once_flag once;
    static std::array<EVP_CIPHER*, kNumCiphers> cache{};
    std::call_once(once, [] {
        for (std::size_t i = 0; i < kCipherTable.size(); ++i) {
            std::string name(kCipherTable[i].openssl_name);
            cache[i] = EVP_CIPHER_fetch(nullptr, name.c_str(), nullptr);
        }
    });
    EVP_CIPHER* cipher = cache[static_cast<std::size_t>(static_cast<int>(c))];
    if (cipher == nullptr) {
        throw Error("OpenSSL does not provide cipher " + std::string(info_of(c).openssl_name));
    }
    return cipher;
}

using CtxPtr = std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)>;

Bytes run_cipher(ByteView input, CipherLabel cipher, const KeyMaterial& km, bool encrypt) {
    const auto shape = cipher_shape(cipher);
    if (km.key.size() != shape.key_len || km.iv.size() != shape.iv_len) {
        throw std::invalid_argument("key material has wrong length for " +
                                    std::string(cipher_name(cipher)));
    }
    if (input.size() % shape.block_len != 0) {
        throw std::invalid_argument("input length " + std::to_string(input.size()) +
                                    " is not a multiple of the " + std::string(cipher_name(cipher)) +
                                    " block size");
    }
    const EVP_CIPHER* evp = fetch_cipher(cipher);

    // OpenSSL's ChaCha20 IV is a 32-bit little-endian block counter followed by the nonce.
    std::array<std::uint8_t, 16> iv_buf{};
    const std::uint8_t* iv = nullptr;
    if (cipher == CipherLabel::CHACHA20) {
        iv_buf[0] = 1;
        std::memcpy(iv_buf.data() + 4, km.iv.data(), 12);
        iv = iv_buf.data();
    } else if (!km.iv.empty()) {
        iv = km.iv.data();
    }

    CtxPtr ctx(EVP_CIPHER_CTX_new(), &EVP_CIPHER_CTX_free);
    if (!ctx) throw Error("EVP_CIPHER_CTX_new failed");
    if (EVP_CipherInit_ex(ctx.get(), evp, nullptr, km.key.data(), iv, encrypt ? 1 : 0) != 1) {
        throw Error("cipher init failed for " + std::string(cipher_name(cipher)));
    }
    EVP_CIPHER_CTX_set_padding(ctx.get(), 0);

    Bytes out(input.size() + 32);
    int len = 0;
    int total = 0;
    if (!input.empty()) {
        if (EVP_CipherUpdate(ctx.get(), out.data(), &len, input.data(),
                             static_cast<int>(input.size())) != 1) {
            throw Error("cipher update failed");
        }
        total = len;
    }
    if (EVP_CipherFinal_ex(ctx.get(), out.data() + total, &len) != 1) {
        throw Error("cipher final failed");
    }
    total += len;
    out.resize(static_cast<std::size_t>(total));
    return out;
}

void put_be(Bytes& out, std::uint64_t v, int nbytes) {
    for (int i = nbytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

std::string_view cipher_name(CipherLabel c) { return info_of(c).name; }

std::optional<CipherLabel> cipher_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kCipherTable.size(); ++i) {
        if (kCipherTable[i].name == name) return static_cast<CipherLabel>(i);
    }
    return std::nullopt;
}

CipherLabel cipher_from_index(int index) {
    if (index < 0 || index >= kNumCiphers) throw std::invalid_argument("cipher index out of range");
    return static_cast<CipherLabel>(index);
}

CipherShape cipher_shape(CipherLabel c) { return info_of(c).shape; }

Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t out_len) {
    constexpr std::size_t hash_len = 32;
    if (out_len > 255 * hash_len) throw std::invalid_argument("HKDF output length exceeds 255*HashLen");
    if (out_len == 0) return {};

    // Extract: an absent salt is HashLen zero bytes.
    std::array<std::uint8_t, hash_len> zero_salt{};
    ByteView s = salt.empty() ? ByteView(zero_salt) : salt;
    std::array<std::uint8_t, hash_len> prk{};
    unsigned int prk_len = 0;
    if (HMAC(EVP_sha256(), s.data(), static_cast<int>(s.size()), ikm.data(), ikm.size(), prk.data(),
             &prk_len) == nullptr) {
        throw Error("HMAC failed");
    }

    // Expand: T(i) = HMAC(PRK, T(i-1) | info | i).
    Bytes okm;
    okm.reserve(out_len + hash_len);
    Bytes block;
    std::array<std::uint8_t, hash_len> t{};
    std::size_t t_len = 0;
    for (std::uint8_t counter = 1; okm.size() < out_len; ++counter) {
        block.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t_len));
        block.insert(block.end(), info.begin(), info.end());
        block.push_back(counter);
        unsigned int len = 0;
        if (HMAC(EVP_sha256(), prk.data(), static_cast<int>(prk_len), block.data(), block.size(),
                 t.data(), &len) == nullptr) {
            throw Error("HMAC failed");
        }
        t_len = len;
        okm.insert(okm.end(), t.begin(), t.begin() + len);
    }
    okm.resize(out_len);
    return okm;
}

Bytes hkdf_derive(const Seed& master_seed, ByteView info, std::size_t out_len) {
    return hkdf_sha256(master_seed, {}, info, out_len);
}

Bytes window_key_info(CipherLabel cipher, std::string_view source_id, std::uint64_t window_index) {
    static constexpr std::string_view kTag = "cipherprint/window-key/v1";
    Bytes info(kTag.begin(), kTag.end());
    info.push_back(static_cast<std::uint8_t>(static_cast<int>(cipher)));
    put_be(info, source_id.size(), 4);
    info.insert(info.end(), source_id.begin(), source_id.end());
    put_be(info, window_index, 8);
    return info;
}

KeyMaterial derive_window_keys(const Seed& master_seed, CipherLabel cipher,
                               std::string_view source_id, std::uint64_t window_index) {
    const auto shape = cipher_shape(cipher);
    Bytes okm = hkdf_derive(master_seed, window_key_info(cipher, source_id, window_index),
                            shape.key_len + shape.iv_len);
    KeyMaterial km;
    km.key.assign(okm.begin(), okm.begin() + static_cast<std::ptrdiff_t>(shape.key_len));
    km.iv.assign(okm.begin() + static_cast<std::ptrdiff_t>(shape.key_len), okm.end());
    return km;
}

Bytes encrypt_window(ByteView plaintext, CipherLabel cipher, const KeyMaterial& km) {
    return run_cipher(plaintext, cipher, km, true);
}

Bytes decrypt_window(ByteView ciphertext, CipherLabel cipher, const KeyMaterial& km) {
    return run_cipher(ciphertext, cipher, km, false);
}

void KeyedStream::CtxDeleter::operator()(void* ctx) const {
    EVP_CIPHER_CTX_free(static_cast<EVP_CIPHER_CTX*>(ctx));
}

KeyedStream::KeyedStream(const Seed& seed, std::string_view purpose) {
    std::string info = "cipherprint/stream/v1|" + std::string(purpose);
    Bytes key = hkdf_derive(seed, as_bytes(info), 32);
    std::array<std::uint8_t, 16> iv{};
    auto* ctx = EVP_CIPHER_CTX_new();
    if (ctx == nullptr) throw Error("EVP_CIPHER_CTX_new failed");
    ctx_.reset(ctx);
    if (EVP_EncryptInit_ex(ctx, fetch_cipher(CipherLabel::CHACHA20), nullptr, key.data(), iv.data()) !=
        1) {
        throw Error("keystream init failed");
    }
}

void KeyedStream::refill() {
    std::array<std::uint8_t, 4096> zeros{};
    int len = 0;
    if (EVP_EncryptUpdate(static_cast<EVP_CIPHER_CTX*>(ctx_.get()), buffer_.data(), &len,
                          zeros.data(), static_cast<int>(zeros.size())) != 1 ||
        len != static_cast<int>(zeros.size())) {
        throw Error("keystream update failed");
    }
    pos_ = 0;
}

void KeyedStream::fill(std::span<std::uint8_t> out) {
    std::size_t done = 0;
    while (done < out.size()) {
        if (pos_ == buffer_.size()) refill();
        std::size_t n = std::min(out.size() - done, buffer_.size() - pos_);
        std::memcpy(out.data() + done, buffer_.data() + pos_, n);
        pos_ += n;
        done += n;
    }
}

Bytes KeyedStream::take(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
}

std::uint64_t KeyedStream::next_u64() {
    std::array<std::uint8_t, 8> b{};
    fill(b);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
}

double KeyedStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t KeyedStream::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
        std::uint64_t v = next_u64();
        if (v < limit) return v % bound;
    }
}

Seed derive_seed(const Seed& parent, std::string_view purpose) {
    std::string info = "cipherprint/seed/v1|" + std::string(purpose);
    Bytes okm = hkdf_derive(parent, as_bytes(info), 32);
    Seed s{};
    std::copy(okm.begin(), okm.end(), s.begin());
    return s;
}

}  // namespace cipherprint
