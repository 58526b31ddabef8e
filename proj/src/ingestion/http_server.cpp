#include <httplib.h>
#include <spdlog/spdlog.h>

#include "parkmon/ingestion.hpp"

namespace parkmon {

struct HttpServer::Impl {
    explicit Impl(IngestionService& s) : service(s) {}
    IngestionService& service;
    httplib::Server server;
};

namespace {

void send(httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(IngestionService& service) : impl_(std::make_unique<Impl>(service)) {
    auto& srv = impl_->server;
    auto& svc = impl_->service;

    // The dashboard is served separately and reads the API cross-origin.
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    srv.Post("/v1/uplink", [&svc](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse r = svc.post_uplink(req.body);
        if (r.status >= 400) spdlog::warn("uplink rejected ({}): {}", r.status, r.body);
        else spdlog::debug("uplink accepted: {}", r.body);
        send(res, r);
    });
    srv.Get("/v1/sensors", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.get_sensors()); });
    srv.Get("/v1/activities", [&svc](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> params;
        for (const auto& [k, v] : req.params) params[k] = v;
        send(res, svc.get_activities(params));
    });
    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "unknown error";
        try {
            if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        spdlog::error("request failed: {}", what);
        res.status = 500;
        res.set_content(R"({"error":"internal","detail":"request failed"})", "application/json");
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) return impl_->server.bind_to_any_port(host);
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace parkmon
