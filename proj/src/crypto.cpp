/* SPDX-License-Identifier: Apache-2.0 */
#include "sbacore/crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <memory>
#include <stdexcept>

namespace sbacore::crypto {

namespace {

struct MacDeleter {
    void operator()(EVP_MAC* m) const { EVP_MAC_free(m); }
    void operator()(EVP_MAC_CTX* c) const { EVP_MAC_CTX_free(c); }
};
struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};

Bytes run_mac(const char* algorithm, const char* param_name, const char* param_value,
              const Bytes& key, const Bytes& data) {
    std::unique_ptr<EVP_MAC, MacDeleter> mac(EVP_MAC_fetch(nullptr, algorithm, nullptr));
    if (!mac) throw std::runtime_error("EVP_MAC_fetch failed");
    std::unique_ptr<EVP_MAC_CTX, MacDeleter> ctx(EVP_MAC_CTX_new(mac.get()));
    if (!ctx) throw std::runtime_error("EVP_MAC_CTX_new failed");

    OSSL_PARAM params[2];
    params[0] = OSSL_PARAM_construct_utf8_string(param_name, const_cast<char*>(param_value), 0);
    params[1] = OSSL_PARAM_construct_end();

    if (EVP_MAC_init(ctx.get(), key.data(), key.size(), params) != 1)
        throw std::runtime_error("EVP_MAC_init failed");
    if (EVP_MAC_update(ctx.get(), data.data(), data.size()) != 1)
        throw std::runtime_error("EVP_MAC_update failed");
    size_t out_len = 0;
    if (EVP_MAC_final(ctx.get(), nullptr, &out_len, 0) != 1)
        throw std::runtime_error("EVP_MAC_final (size) failed");
    Bytes out(out_len);
    if (EVP_MAC_final(ctx.get(), out.data(), &out_len, out.size()) != 1)
        throw std::runtime_error("EVP_MAC_final failed");
    out.resize(out_len);
    return out;
}

}  // namespace

Bytes sha256(const Bytes& data) {
    Bytes out(32);
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("EVP_Digest failed");
    out.resize(len);
    return out;
}

Bytes hmac_sha256(const Bytes& key, const Bytes& data) {
    return run_mac("HMAC", OSSL_MAC_PARAM_DIGEST, "SHA-256", key, data);
}

Bytes aes128_cmac(const Bytes& key, const Bytes& data) {
    if (key.size() != 16) throw std::invalid_argument("aes128_cmac: key must be 16 bytes");
    return run_mac("CMAC", OSSL_MAC_PARAM_CIPHER, "AES-128-CBC", key, data);
}

Bytes aes128_encrypt_block(const Bytes& key, const Bytes& block) {
    if (key.size() != 16 || block.size() != 16)
        throw std::invalid_argument("aes128_encrypt_block: key and block must be 16 bytes");
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.data(), nullptr) != 1)
        throw std::runtime_error("aes128 init failed");
    EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
    Bytes out(16);
    int len = 0;
    if (EVP_EncryptUpdate(ctx.get(), out.data(), &len, block.data(), 16) != 1 || len != 16)
        throw std::runtime_error("aes128 update failed");
    return out;
}

Bytes aes128_ctr(const Bytes& key, const Bytes& nonce16, const Bytes& data) {
    if (key.size() != 16 || nonce16.size() != 16)
        throw std::invalid_argument("aes128_ctr: key and nonce must be 16 bytes");
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key.data(), nonce16.data()) != 1)
        throw std::runtime_error("aes128_ctr init failed");
    Bytes out(data.size());
    int len = 0;
    if (!data.empty() &&
        EVP_EncryptUpdate(ctx.get(), out.data(), &len, data.data(), static_cast<int>(data.size())) != 1)
        throw std::runtime_error("aes128_ctr update failed");
    return out;
}

Bytes aead_seal(const Bytes& key, const Bytes& nonce12, const Bytes& aad, const Bytes& plaintext) {
    if (key.size() != 16 || nonce12.size() != 12)
        throw std::invalid_argument("aead_seal: key must be 16 bytes, nonce 12");
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
    if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(), nonce12.data()) != 1)
        throw std::runtime_error("gcm init failed");
    int len = 0;
    if (!aad.empty() &&
        EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1)
        throw std::runtime_error("gcm aad failed");
    Bytes out(plaintext.size() + 16);
    if (!plaintext.empty() &&
        EVP_EncryptUpdate(ctx.get(), out.data(), &len, plaintext.data(),
                          static_cast<int>(plaintext.size())) != 1)
        throw std::runtime_error("gcm update failed");
    int fin = 0;
    if (EVP_EncryptFinal_ex(ctx.get(), out.data() + plaintext.size(), &fin) != 1)
        throw std::runtime_error("gcm final failed");
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16, out.data() + plaintext.size()) != 1)
        throw std::runtime_error("gcm get tag failed");
    return out;
}

bool aead_open(const Bytes& key, const Bytes& nonce12, const Bytes& aad, const Bytes& sealed,
               Bytes& plaintext_out) {
    if (key.size() != 16 || nonce12.size() != 12 || sealed.size() < 16) return false;
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx(EVP_CIPHER_CTX_new());
    if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(), nonce12.data()) != 1)
        return false;
    int len = 0;
    if (!aad.empty() &&
        EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1)
        return false;
    const size_t ct_len = sealed.size() - 16;
    plaintext_out.assign(ct_len, 0);
    if (ct_len > 0 &&
        EVP_DecryptUpdate(ctx.get(), plaintext_out.data(), &len, sealed.data(),
                          static_cast<int>(ct_len)) != 1)
        return false;
    Bytes tag(sealed.end() - 16, sealed.end());
    if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, tag.data()) != 1) return false;
    int fin = 0;
    if (EVP_DecryptFinal_ex(ctx.get(), plaintext_out.data() + ct_len, &fin) != 1) {
        plaintext_out.clear();
        return false;
    }
    return true;
}

bool constant_time_equal(const Bytes& a, const Bytes& b) {
    if (a.size() != b.size()) return false;
    return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace sbacore::crypto
