// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#include <gsdanchor/toolapi.hpp>

// Bursts of simultaneous clients overflow httplib's default backlog of 5.
#define CPPHTTPLIB_LISTEN_BACKLOG 512
#include <httplib.h>

namespace gsdanchor {

struct ToolServer::Impl
{
    explicit Impl(ServiceContext ctx) : context(std::move(ctx)) {}

    const ServiceContext context;
    httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const ToolResult& result)
{
    res.status = result.status;
    res.set_content(result.body.dump() + "\n", "application/json");
}

} // namespace

ToolServer::ToolServer(ServiceContext context) : impl_(std::make_unique<Impl>(std::move(context)))
{
    const ServiceContext& ctx = impl_->context;
    auto& srv = impl_->server;

    srv.Post("/v1/estimate", [&ctx](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_estimate(std::string_view(req.body), ctx));
    });
    srv.Post("/v1/area", [&ctx](const httplib::Request& req, httplib::Response& res) {
        reply(res, handle_area(std::string_view(req.body), ctx));
    });
    srv.Get("/v1/health", [&ctx](const httplib::Request&, httplib::Response& res) {
        reply(res, {200, health(ctx)});
    });
    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        nlohmann::json body = {{"error", {{"code", res.status == 404 ? "not_found" : "http_error"},
                                          {"message", httplib::status_message(res.status)}}}};
        res.set_content(body.dump() + "\n", "application/json");
    });
}

ToolServer::~ToolServer()
{
    stop();
}

int ToolServer::bind(const std::string& host, int port)
{
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ToolServer::listen()
{
    return impl_->server.listen_after_bind();
}

void ToolServer::stop()
{
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

} // namespace gsdanchor
