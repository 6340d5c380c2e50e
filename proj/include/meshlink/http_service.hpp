#ifndef MESHLINK_HTTP_SERVICE_HPP
#define MESHLINK_HTTP_SERVICE_HPP

#include "meshlink/app.hpp"

#include <httplib.h>

#include <string>

namespace meshlink::app {

/// Routes every request through handle_request; the server holds no other state.
inline void mount_routes(httplib::Server& server)
{
    const auto dispatch = [](const httplib::Request& req, httplib::Response& res) {
        const auto r = handle_request(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server.Get(R"(/.*)", dispatch);
    server.Post(R"(/.*)", dispatch);
    server.Put(R"(/.*)", dispatch);
    server.Delete(R"(/.*)", dispatch);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

} // namespace meshlink::app

#endif // MESHLINK_HTTP_SERVICE_HPP
