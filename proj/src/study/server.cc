#include "rqi/study/server.h"

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "rqi/error.h"

namespace rqi {
namespace {

using Json = nlohmann::ordered_json;

void send_error(httplib::Response& res, int status, const char* kind, const std::string& message) {
  res.status = status;
  res.set_content(Json{{"error", kind}, {"message", message}}.dump() + "\n", "application/json");
}

// Runs a handler and maps domain errors to HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    send_error(res, 400, "ValidationError", e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, "ConflictError", e.what());
  } catch (const UnknownStudy& e) {
    send_error(res, 404, "UnknownStudy", e.what());
  } catch (const UnknownRecord& e) {
    send_error(res, 404, "UnknownRecord", e.what());
  } catch (const StaleRecord& e) {
    send_error(res, 410, "StaleRecord", e.what());
  } catch (const IoError& e) {
    send_error(res, 500, "IoError", e.what());
  } catch (const FormatError& e) {
    send_error(res, 500, "FormatError", e.what());
  } catch (const Error& e) {
    send_error(res, 400, "Error", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "InternalError", e.what());
  }
}

void send_json(httplib::Response& res, const std::string& body, int status = 200) {
  res.status = status;
  res.set_content(body, "application/json");
}

std::string image_url(const std::string& study, const std::string& content, const std::string& item) {
  return "/studies/" + study + "/images/" + item + "?content=" + content;
}

}  // namespace

struct StudyServer::Impl {
  StudyService& service;
  std::filesystem::path base_dir;
  httplib::Server http;
  std::thread thread;

  Impl(StudyService& s, std::filesystem::path base) : service(s), base_dir(std::move(base)) { routes(); }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    http.Post("/studies", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const StudyManifest m = parse_study_manifest(req.body, base_dir);
        service.create_study(m);
        std::size_t pairs = 0;
        for (const auto& c : m.contents) pairs += c.items.size() * (c.items.size() - 1) / 2;
        send_json(res, Json{{"study_id", m.study_id}, {"pairs", pairs}}.dump() + "\n", 201);
      });
    });

    http.Get("/studies", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, Json{{"studies", service.study_ids()}}.dump() + "\n"); });
    });

    http.Get(R"(/studies/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        if (!req.has_param("rater")) throw ValidationError("missing 'rater' query parameter");
        const Assignment a = service.next_pair(id, req.get_param_value("rater"));
        Json j;
        j["done"] = a.done;
        if (!a.done) {
          j["record_id"] = a.record_id;
          j["study_id"] = id;
          j["content_id"] = a.content_id;
          j["left_image"] = image_url(id, a.content_id, a.left_item);
          j["right_image"] = image_url(id, a.content_id, a.right_item);
          j["assignment_seed"] = std::to_string(a.assignment_seed);
        }
        send_json(res, j.dump() + "\n");
      });
    });

    http.Post(R"(/studies/([^/]+)/choices)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        Json body;
        try {
          body = Json::parse(req.body);
        } catch (const Json::parse_error&) {
          throw ValidationError("choice body is not valid JSON");
        }
        if (!body.is_object() || !body.contains("record_id") || !body["record_id"].is_string()) {
          throw ValidationError("choice needs a string 'record_id'");
        }
        if (!body.contains("chosen") || !body["chosen"].is_string()) {
          throw ValidationError("choice needs 'chosen' set to left or right");
        }
        const std::string chosen = body["chosen"];
        if (chosen != "left" && chosen != "right") throw ValidationError("'chosen' must be left or right");
        std::string rater;
        if (body.contains("rater_id")) {
          if (!body["rater_id"].is_string()) throw ValidationError("'rater_id' must be a string");
          rater = body["rater_id"];
        }
        const ChoiceAck ack = service.record_choice(id, body["record_id"], rater,
                                                    chosen == "left" ? Side::kLeft : Side::kRight);
        send_json(res, Json{{"record_id", ack.record_id}, {"duplicate", ack.duplicate}}.dump() + "\n");
      });
    });

    http.Get(R"(/studies/([^/]+)/status)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, status_json(service.status(req.matches[1]))); });
    });

    http.Get(R"(/studies/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        send_json(res, counts_json(id, service.export_counts(id)));
      });
    });

    http.Get(R"(/studies/([^/]+)/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.has_param("content")) throw ValidationError("missing 'content' query parameter");
        const auto png = service.image_png(req.matches[1], req.get_param_value("content"), req.matches[2]);
        res.status = 200;
        res.set_content(std::string(png.begin(), png.end()), "image/png");
      });
    });
  }
};

StudyServer::StudyServer(StudyService& service, std::filesystem::path manifest_base_dir)
    : impl_(std::make_unique<Impl>(service, std::move(manifest_base_dir))) {}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->http.bind_to_any_port(host);
    if (p <= 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!impl_->http.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void StudyServer::listen() { impl_->http.listen_after_bind(); }

void StudyServer::start() {
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void StudyServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace rqi
