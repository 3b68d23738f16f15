#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "lss/agent.hpp"
#include "lss/errors.hpp"

namespace lss {

/// Single request/response reasoner over HTTP. Wire contract:
/// POST /respond with {view_text, intent_text, history_digest},
/// reply {text, actions[]}.
class RemoteReasoner : public Reasoner {
 public:
  explicit RemoteReasoner(std::string base_url) : url_(std::move(base_url)) {}

  Output respond(const std::string& view_text, const std::string& intent_text,
                 const std::string& history_digest) override {
    nlohmann::json req;
    req["view_text"] = view_text;
    req["intent_text"] = intent_text;
    req["history_digest"] = history_digest;
    httplib::Client client(url_);
    auto res = client.Post("/respond", req.dump(), "application/json");
    if (!res || res->status != 200)
      fail(ErrorCode::IoError, "remote reasoner at " + url_ + " unreachable");
    nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_discarded() || !body.contains("text"))
      fail(ErrorCode::IoError, "remote reasoner returned a malformed response");
    Output out;
    out.text = body["text"].get<std::string>();
    if (body.contains("actions"))
      for (const auto& a : body["actions"]) out.actions.push_back(a.get<std::string>());
    return out;
  }

 private:
  std::string url_;
};

}  // namespace lss
