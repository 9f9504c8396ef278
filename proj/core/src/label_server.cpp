#include "aler/label_server.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace aler {

using json = nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void fail(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, json{{"error", message}});
}

json attributes_json(const std::string& id,
                     const std::vector<std::pair<std::string, std::string>>& attributes) {
  json list = json::array();
  for (const auto& [name, value] : attributes) list.push_back({{"name", name}, {"value", value}});
  return {{"id", id}, {"attributes", std::move(list)}};
}

json optional_json(const std::optional<std::size_t>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

struct LabelServer::Impl {
  httplib::Server server;
  std::thread thread;
};

LabelServer::LabelServer(LabelQueue& queue, const RunStatusBoard& status, LabelServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  auto& svr = impl_->server;
  const auto opts = std::move(options);
  LabelQueue* q = &queue;
  const RunStatusBoard* board = &status;

  if (opts.token) {
    const std::string token = *opts.token;
    svr.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
      if (req.path.rfind("/api/", 0) == 0 && req.get_header_value("X-Aler-Token") != token) {
        fail(res, 401, "missing or invalid X-Aler-Token header");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });
  }

  const std::size_t default_limit = opts.default_task_limit;
  svr.Get("/api/tasks", [q, default_limit](const httplib::Request& req, httplib::Response& res) {
    std::size_t limit = default_limit;
    if (req.has_param("limit")) {
      try {
        limit = parse_size(req.get_param_value("limit"), "limit");
      } catch (const ValidationError& e) {
        fail(res, 400, e.what());
        return;
      }
    }
    json tasks = json::array();
    for (const auto& t : q->pending(limit)) {
      tasks.push_back({{"task_id", t.id},
                       {"r_id", t.pair.r_id},
                       {"s_id", t.pair.s_id},
                       {"provenance", to_string(t.provenance)},
                       {"status", "pending"},
                       {"r", attributes_json(t.pair.r_id, t.r_attributes)},
                       {"s", attributes_json(t.pair.s_id, t.s_attributes)}});
    }
    reply(res, 200, json{{"tasks", std::move(tasks)}});
  });

  svr.Post("/api/labels", [q](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      fail(res, 400, "body must be a JSON object");
      return;
    }
    if (!body.contains("task_id") || !body["task_id"].is_number_unsigned()) {
      fail(res, 400, "task_id must be a non-negative integer");
      return;
    }
    if (!body.contains("label") || !body["label"].is_number_integer()) {
      fail(res, 400, "label must be 0 or 1");
      return;
    }
    try {
      const auto result =
          q->submit(body["task_id"].get<std::uint64_t>(), body["label"].get<int>());
      reply(res, 200, json{{"consumed", result.consumed}, {"remaining", optional_json(result.remaining)}});
    } catch (const TaskNotFound& e) {
      fail(res, 404, e.what());
    } catch (const TaskAlreadyAnswered& e) {
      fail(res, 409, e.what());
    } catch (const BudgetExhausted& e) {
      fail(res, 403, e.what());
    } catch (const ValidationError& e) {
      fail(res, 400, e.what());
    }
  });

  svr.Get("/api/status", [q, board](const httplib::Request&, httplib::Response& res) {
    const auto snap = board->snapshot();
    const auto& budget = q->budget();
    reply(res, 200,
          json{{"chunk", snap.chunk},
               {"iteration", snap.iteration},
               {"phase", snap.phase},
               {"f1_history", snap.f1_history},
               {"budget",
                {{"consumed", budget.consumed()},
                 {"cap", optional_json(budget.hard_cap())},
                 {"remaining", optional_json(budget.remaining())}}}});
  });

  if (opts.static_dir) {
    if (!svr.set_mount_point("/", opts.static_dir->string())) {
      throw ValidationError("static_dir " + opts.static_dir->string() + " is not a directory");
    }
  }

  host_ = opts.host;
  requested_port_ = opts.port;
}

LabelServer::~LabelServer() { stop(); }

int LabelServer::start() {
  auto& svr = impl_->server;
  port_ = requested_port_ == 0 ? svr.bind_to_any_port(host_)
                               : (svr.bind_to_port(host_, requested_port_) ? requested_port_ : -1);
  if (port_ < 0) {
    throw Error("cannot bind " + host_ + ":" + std::to_string(requested_port_));
  }
  impl_->thread = std::thread([&svr] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  return port_;
}

void LabelServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace aler
