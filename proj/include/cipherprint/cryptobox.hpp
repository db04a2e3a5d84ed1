#pragma once
// Six-cipher suite with per-window HKDF keying.
//
// Ciphers run through OpenSSL (the legacy provider supplies Blowfish and RC4).
// Ciphertext length always equals plaintext length: no padding, no IV prefix.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "cipherprint/common.hpp"

namespace cipherprint {

enum class CipherLabel : int {
    AES_ECB = 0,
    AES_CBC = 1,
    TDES_CBC = 2,
    BLOWFISH_CBC = 3,
    CHACHA20 = 4,
    RC4 = 5,
};

inline constexpr int kNumCiphers = 6;
inline constexpr std::array<CipherLabel, kNumCiphers> kAllCiphers = {
    CipherLabel::AES_ECB,      CipherLabel::AES_CBC,  CipherLabel::TDES_CBC,
    CipherLabel::BLOWFISH_CBC, CipherLabel::CHACHA20, CipherLabel::RC4,
};

std::string_view cipher_name(CipherLabel c);
std::optional<CipherLabel> cipher_from_name(std::string_view name);
CipherLabel cipher_from_index(int index);

struct CipherShape {
    std::size_t key_len;
    std::size_t iv_len;
    std::size_t block_len;  // 1 for stream ciphers
    std::string_view mode;  // recorded in dataset metadata
};

CipherShape cipher_shape(CipherLabel c);

struct KeyMaterial {
    Bytes key;
    Bytes iv;  // nonce for ChaCha20, empty for ECB and RC4
};

// RFC 5869 HKDF with SHA-256. Throws std::invalid_argument when out_len > 8160.
Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, std::size_t out_len);

// HKDF keyed by a 32-byte master seed with an empty salt.
Bytes hkdf_derive(const Seed& master_seed, ByteView info, std::size_t out_len);

// Injective encoding of (cipher id, source id, window index) used as HKDF info.
Bytes window_key_info(CipherLabel cipher, std::string_view source_id, std::uint64_t window_index);

KeyMaterial derive_window_keys(const Seed& master_seed, CipherLabel cipher,
                               std::string_view source_id, std::uint64_t window_index);

// Block modes require |plaintext| to be a multiple of the block size.
Bytes encrypt_window(ByteView plaintext, CipherLabel cipher, const KeyMaterial& km);
Bytes decrypt_window(ByteView ciphertext, CipherLabel cipher, const KeyMaterial& km);

// Deterministic keystream generator: ChaCha20 keyed by HKDF(seed, purpose).
class KeyedStream {
public:
    KeyedStream(const Seed& seed, std::string_view purpose);

    void fill(std::span<std::uint8_t> out);
    Bytes take(std::size_t n);
    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Uniform integer on [0, bound), rejection sampled.
    std::uint64_t below(std::uint64_t bound);

private:
    void refill();

    struct CtxDeleter {
        void operator()(void* ctx) const;
    };
    std::unique_ptr<void, CtxDeleter> ctx_;
    std::array<std::uint8_t, 4096> buffer_{};
    std::size_t pos_ = 4096;
};

// Derive a child seed for a named purpose (e.g. per-source plaintext seeds).
Seed derive_seed(const Seed& parent, std::string_view purpose);

}  // namespace cipherprint
