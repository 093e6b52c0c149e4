#pragma once

#include <map>
#include <string>
#include <vector>

#include "vbmi/config.hpp"
#include "vbmi/store.hpp"

namespace httplib {
class Server;
}

namespace vbmi::backend {

// Static bearer-token table: each token names the users it may act for,
// or "*" for all users.
class AuthTable {
 public:
  void add(std::string token, std::vector<std::string> users);

  // config keys are tokens, values comma-separated user lists
  static AuthTable from_config(const Config& cfg);

  bool allows(const std::string& token, const std::string& user_id) const;
  bool empty() const { return tokens_.empty(); }

 private:
  std::map<std::string, std::vector<std::string>> tokens_;
};

// HTTP facade over a TemplateStore:
//   PUT /v1/users/{id}/templates            body = template blob
//       headers: X-Algo: trca|tdca, X-Content-Hash: crc32 hex
//   GET /v1/users/{id}/templates/latest
//   GET /v1/users/{id}/templates/{version}
// All routes require "Authorization: Bearer <token>". GET responses carry
// X-Version, X-Algo, X-Content-Hash, and X-Cache: hit|miss.
class TemplateService {
 public:
  TemplateService(TemplateStore& store, AuthTable auth);

  void attach(httplib::Server& server);

 private:
  TemplateStore& store_;
  AuthTable auth_;
};

}  // namespace vbmi::backend
