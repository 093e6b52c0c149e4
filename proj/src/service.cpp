#include "vbmi/service.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <limits>
#include <span>

#include "httplib.h"
#include "vbmi/hashes.hpp"

namespace vbmi::backend {

namespace {

std::string json_error(const std::string& message) {
  std::string out = "{\"error\":\"";
  for (const char c : message) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += "\"}";
  return out;
}

std::string hash_hex(std::uint32_t h) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", h);
  return buf;
}

// bearer token from the Authorization header; empty when absent or malformed
std::string bearer_token(const httplib::Request& req) {
  const std::string auth = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (auth.size() <= prefix.size() || std::string_view(auth).substr(0, prefix.size()) != prefix) {
    return {};
  }
  return auth.substr(prefix.size());
}

}  // namespace

void AuthTable::add(std::string token, std::vector<std::string> users) {
  if (token.empty()) throw std::invalid_argument("AuthTable: empty token");
  tokens_[std::move(token)] = std::move(users);
}

AuthTable AuthTable::from_config(const Config& cfg) {
  AuthTable table;
  for (const auto& [token, users] : cfg.values()) {
    std::vector<std::string> list;
    std::string item;
    for (const char c : users + ",") {
      if (c == ',') {
        const auto begin = item.find_first_not_of(" \t");
        if (begin != std::string::npos) {
          const auto end = item.find_last_not_of(" \t");
          list.push_back(item.substr(begin, end - begin + 1));
        }
        item.clear();
      } else {
        item += c;
      }
    }
    table.add(token, std::move(list));
  }
  return table;
}

bool AuthTable::allows(const std::string& token, const std::string& user_id) const {
  const auto it = tokens_.find(token);
  if (it == tokens_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&user_id](const std::string& u) { return u == "*" || u == user_id; });
}

TemplateService::TemplateService(TemplateStore& store, AuthTable auth)
    : store_(store), auth_(std::move(auth)) {}

void TemplateService::attach(httplib::Server& server) {
  const auto authorize = [this](const httplib::Request& req, httplib::Response& res,
                                const std::string& user_id) {
    const std::string token = bearer_token(req);
    if (token.empty() || !auth_.allows(token, user_id)) {
      res.status = 401;
      res.set_content(json_error("missing or unauthorized bearer token"), "application/json");
      return false;
    }
    return true;
  };

  const auto serve_fetch = [this, authorize](const httplib::Request& req, httplib::Response& res,
                                             std::optional<std::uint64_t> version) {
    const std::string user_id = req.matches[1];
    if (!authorize(req, res, user_id)) return;
    try {
      const Fetched got = store_.fetch(user_id, version);
      res.status = 200;
      res.set_header("X-Version", std::to_string(got.version));
      res.set_header("X-Algo", std::string(algo_name(got.record->algo)));
      res.set_header("X-Content-Hash", hash_hex(got.record->content_hash));
      res.set_header("X-Cache", got.from_cache ? "hit" : "miss");
      res.set_content(got.record->payload, "application/octet-stream");
    } catch (const NotFoundError& e) {
      res.status = 404;
      res.set_content(json_error(e.what()), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json_error(e.what()), "application/json");
    }
  };

  server.Put(R"(/v1/users/([^/]+)/templates)",
             [this, authorize](const httplib::Request& req, httplib::Response& res) {
               const std::string user_id = req.matches[1];
               if (!authorize(req, res, user_id)) return;
               TemplateRecord record;
               record.user_id = user_id;
               record.created_at_unix = static_cast<std::int64_t>(std::time(nullptr));
               record.payload = req.body;
               const std::string declared_hash = req.get_header_value("X-Content-Hash");
               const std::string declared_algo = req.get_header_value("X-Algo");
               try {
                 if (declared_hash.empty() || declared_algo.empty()) {
                   throw std::invalid_argument("X-Algo and X-Content-Hash headers are required");
                 }
                 record.content_hash =
                     static_cast<std::uint32_t>(std::stoul(declared_hash, nullptr, 16));
                 record.algo = algo_from_name(declared_algo);
                 const std::uint64_t version = store_.put(std::move(record));
                 res.status = 200;
                 res.set_content("{\"version\":" + std::to_string(version) + "}",
                                 "application/json");
               } catch (const AlgoMismatchError& e) {
                 res.status = 409;
                 res.set_content(json_error(e.what()), "application/json");
               } catch (const std::invalid_argument& e) {
                 res.status = 400;
                 res.set_content(json_error(e.what()), "application/json");
               } catch (const std::exception& e) {
                 // malformed payload envelopes land here
                 res.status = 400;
                 res.set_content(json_error(e.what()), "application/json");
               }
             });

  server.Get(R"(/v1/users/([^/]+)/templates/latest)",
             [serve_fetch](const httplib::Request& req, httplib::Response& res) {
               serve_fetch(req, res, std::nullopt);
             });

  server.Get(R"(/v1/users/([^/]+)/templates/(\d+))",
             [serve_fetch](const httplib::Request& req, httplib::Response& res) {
               std::uint64_t version = 0;
               try {
                 version = std::stoull(req.matches[2]);
               } catch (const std::out_of_range&) {
                 version = std::numeric_limits<std::uint64_t>::max();  // maps to 404
               }
               serve_fetch(req, res, version);
             });
}

}  // namespace vbmi::backend
