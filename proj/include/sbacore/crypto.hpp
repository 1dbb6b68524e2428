/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include "sbacore/bytes.hpp"

namespace sbacore::crypto {

Bytes sha256(const Bytes& data);
Bytes hmac_sha256(const Bytes& key, const Bytes& data);

// Single AES-128 block encryption (16-byte key, 16-byte block).
Bytes aes128_encrypt_block(const Bytes& key, const Bytes& block);

// AES-128-CTR keystream XOR; encrypt and decrypt are the same operation.
Bytes aes128_ctr(const Bytes& key, const Bytes& nonce16, const Bytes& data);

// AES-128-CMAC tag (16 bytes); LoRaWAN MICs truncate to the first 4.
Bytes aes128_cmac(const Bytes& key, const Bytes& data);

// AES-128-GCM. seal returns ciphertext || 16-byte tag; open returns empty
// optional-like flag through ok on authentication failure.
Bytes aead_seal(const Bytes& key, const Bytes& nonce12, const Bytes& aad, const Bytes& plaintext);
bool aead_open(const Bytes& key, const Bytes& nonce12, const Bytes& aad, const Bytes& sealed,
               Bytes& plaintext_out);

bool constant_time_equal(const Bytes& a, const Bytes& b);

}  // namespace sbacore::crypto
