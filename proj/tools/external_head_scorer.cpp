// Reference external scorer speaking the exchange protocol: reads the
// request manifest, scores every id with the linear head stored as
// model.json next to the executable, and writes the response JSON Lines.
// Useful both as a protocol smoke test and as a template for wrapping real
// models behind the `--scorer external:<dir>` flag.

#include "archboot/corpus.hpp"
#include "archboot/linear_head.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv)
{
    using nlohmann::json;
    namespace fs = std::filesystem;

    if (argc != 2) {
        std::cerr << "usage: scorer <request-manifest.json>\n";
        return 2;
    }
    try {
        std::ifstream manifest_in(argv[1]);
        if (!manifest_in) {
            throw std::runtime_error(std::string("cannot open manifest ") +
                                     argv[1]);
        }
        const json manifest = json::parse(manifest_in);
        const auto ids_path = manifest.at("ids").get<std::string>();
        const auto emb_path = manifest.at("embeddings").get<std::string>();
        const auto out_path = manifest.at("output").get<std::string>();

        const fs::path model_path =
            fs::path(argv[0]).parent_path() / "model.json";
        const auto head = archboot::LinearHead::load(model_path.string());

        auto [dim, table] = archboot::read_embeddings(emb_path);
        if (dim != head.dim()) {
            throw std::runtime_error("model/embedding dimension mismatch");
        }

        std::ifstream ids(ids_path);
        std::ofstream out(out_path);
        std::string id;
        while (std::getline(ids, id)) {
            if (id.empty()) {
                continue;
            }
            auto it = table.find(id);
            if (it == table.end()) {
                throw std::runtime_error("no embedding for id " + id);
            }
            const double conf =
                archboot::predict_confidence(head, it->second);
            json record = {{"id", id}, {"conf", conf}};
            out << record.dump() << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "scorer error: " << e.what() << '\n';
        return 1;
    }
}
