#include "vqaflow/fingerprint.hpp"

#include <openssl/evp.h>

#include <memory>
#include <stdexcept>

#include "vqaflow/textutil.hpp"

namespace vqaflow {

std::string sha256_hex(const std::uint8_t* data, std::size_t len) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data, len) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &digest_len) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  return text::to_hex(digest, digest_len);
}

std::string sha256_hex(const std::string& data) {
  return sha256_hex(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
}

std::string fingerprint_request(AgentKind /*kind*/, const std::string& canonical_payload) {
  return sha256_hex(canonical_payload);
}

}  // namespace vqaflow
