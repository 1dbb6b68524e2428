/* SPDX-License-Identifier: Apache-2.0 */
#include <doctest.h>

#include "sbacore/bytes.hpp"
#include "sbacore/crypto.hpp"

using namespace sbacore;

TEST_CASE("hex and base64 round-trip") {
    Bytes data = {0x00, 0x01, 0xfe, 0xff, 0x42};
    CHECK(from_hex(to_hex(data)) == data);
    CHECK(to_hex(data) == "0001feff42");
    CHECK(from_base64(to_base64(data)) == data);
    for (size_t n = 0; n < 12; ++n) {
        Bytes v(n);
        for (size_t i = 0; i < n; ++i) v[i] = static_cast<uint8_t>(i * 37 + n);
        CHECK(from_base64(to_base64(v)) == v);
    }
    CHECK_THROWS(from_hex("abc"));
    CHECK_THROWS(from_hex("zz"));
    CHECK_THROWS(from_base64("a"));
}

TEST_CASE("sha256 known vectors") {
    CHECK(to_hex(crypto::sha256({})) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(to_hex(crypto::sha256(to_bytes("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("hmac-sha256 rfc4231 vectors") {
    // test case 1
    Bytes key1(20, 0x0b);
    CHECK(to_hex(crypto::hmac_sha256(key1, to_bytes("Hi There"))) ==
          "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
    // test case 2
    CHECK(to_hex(crypto::hmac_sha256(to_bytes("Jefe"), to_bytes("what do ya want for nothing?"))) ==
          "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
}

TEST_CASE("aes128 block fips-197 vector") {
    Bytes key = from_hex("000102030405060708090a0b0c0d0e0f");
    Bytes pt = from_hex("00112233445566778899aabbccddeeff");
    CHECK(to_hex(crypto::aes128_encrypt_block(key, pt)) == "69c4e0d86a7b0430d8cdb78070b4c55a");
}

TEST_CASE("aes128 cmac rfc4493 vectors") {
    Bytes key = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    CHECK(to_hex(crypto::aes128_cmac(key, {})) == "bb1d6929e95937287fa37d129b756746");
    CHECK(to_hex(crypto::aes128_cmac(key, from_hex("6bc1bee22e409f96e93d7e117393172a"))) ==
          "070a16b46b4d4144f79bdd9dd04a287c");
}

TEST_CASE("aes128 ctr nist sp800-38a vector and round-trip") {
    Bytes key = from_hex("2b7e151628aed2a6abf7158809cf4f3c");
    Bytes nonce = from_hex("f0f1f2f3f4f5f6f7f8f9fafbfcfdfeff");
    Bytes pt = from_hex("6bc1bee22e409f96e93d7e117393172a");
    Bytes ct = crypto::aes128_ctr(key, nonce, pt);
    CHECK(to_hex(ct) == "874d6191b620e3261bef6864990db6ce");
    CHECK(crypto::aes128_ctr(key, nonce, ct) == pt);
}

TEST_CASE("aead seal/open round-trip and tamper rejection") {
    Bytes key = from_hex("000102030405060708090a0b0c0d0e0f");
    Bytes nonce = from_hex("000000000000000000000001");
    Bytes aad = to_bytes("header");
    Bytes pt = to_bytes("user plane payload");

    Bytes sealed = crypto::aead_seal(key, nonce, aad, pt);
    CHECK(sealed.size() == pt.size() + 16);

    Bytes opened;
    REQUIRE(crypto::aead_open(key, nonce, aad, sealed, opened));
    CHECK(opened == pt);

    Bytes tampered = sealed;
    tampered[3] ^= 0x01;
    CHECK_FALSE(crypto::aead_open(key, nonce, aad, tampered, opened));

    Bytes wrong_aad = to_bytes("headex");
    CHECK_FALSE(crypto::aead_open(key, nonce, wrong_aad, sealed, opened));

    Bytes wrong_nonce = from_hex("000000000000000000000002");
    CHECK_FALSE(crypto::aead_open(key, wrong_nonce, aad, sealed, opened));
}

TEST_CASE("constant time equal") {
    CHECK(crypto::constant_time_equal(to_bytes("abc"), to_bytes("abc")));
    CHECK_FALSE(crypto::constant_time_equal(to_bytes("abc"), to_bytes("abd")));
    CHECK_FALSE(crypto::constant_time_equal(to_bytes("abc"), to_bytes("ab")));
}
