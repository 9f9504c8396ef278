#pragma once

// JSON-over-HTTP front of a LabelQueue for the browser labeling console.
//
//   GET  /api/tasks?limit=n   pending tasks with both records' attributes
//   POST /api/labels          {"task_id": int, "label": 0|1}
//                             -> {"consumed": int, "remaining": int|null}
//   GET  /api/status          {"chunk", "iteration", "phase", "f1_history",
//                              "budget": {"consumed", "cap", "remaining"}}
//
// Failures answer {"error": "..."} with 400 (malformed request), 401 (bad
// token), 403 (budget exhausted), 404 (unknown task) or 409 (already
// answered).

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "aler/oracle.hpp"

namespace aler {

struct LabelServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  ///< 0 binds any free port
  /// When set, every /api request must carry it in the X-Aler-Token header.
  std::optional<std::string> token;
  /// Served at "/" when set (the console's static assets).
  std::optional<std::filesystem::path> static_dir;
  std::size_t default_task_limit = 20;
};

class LabelServer {
 public:
  LabelServer(LabelQueue& queue, const RunStatusBoard& status, LabelServerOptions options = {});
  ~LabelServer();
  LabelServer(const LabelServer&) = delete;
  LabelServer& operator=(const LabelServer&) = delete;

  /// Binds and starts serving on a background thread; returns the bound
  /// port. Throws Error when the address cannot be bound.
  int start();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  int requested_port_ = 0;
  int port_ = 0;
};

}  // namespace aler
