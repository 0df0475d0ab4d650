#include "duplexweave/tokenizer.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "duplexweave/error.hpp"

namespace duplexweave {

std::vector<TokenId> TextTokenizer::encode_words(std::span<const std::string> words) const {
    std::vector<TokenId> out;
    const auto sep = separator();
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0 && sep) {
            out.push_back(*sep);
        }
        const auto ids = encode_word(words[i]);
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

std::vector<TokenId> ByteTokenizer::encode_word(std::string_view word) const {
    std::vector<TokenId> out;
    out.reserve(word.size());
    for (unsigned char c : word) {
        out.push_back(base_ + c);
    }
    return out;
}

std::string ByteTokenizer::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id < base_ || id - base_ > 0xFF) {
            throw Error(ErrorCode::InvalidInput, "token " + std::to_string(id) + " is not a byte token");
        }
        out.push_back(static_cast<char>(id - base_));
    }
    return out;
}

TableTokenizer::TableTokenizer(std::map<std::string, std::vector<TokenId>> table, std::optional<TokenId> separator,
                               TokenId fallback_base)
    : table_(table.begin(), table.end()), separator_(separator), fallback_(fallback_base) {}

TableTokenizer TableTokenizer::load(const std::filesystem::path& path, TokenId fallback_base) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open tokenizer table " + path.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        std::optional<TokenId> sep;
        if (j.contains("separator") && !j.at("separator").is_null()) {
            sep = j.at("separator").get<TokenId>();
        }
        auto table = j.at("words").get<std::map<std::string, std::vector<TokenId>>>();
        return TableTokenizer(std::move(table), sep, fallback_base);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, path.string() + ": " + e.what());
    }
}

std::vector<TokenId> TableTokenizer::encode_word(std::string_view word) const {
    if (const auto it = table_.find(word); it != table_.end()) {
        return it->second;
    }
    return fallback_.encode_word(word);
}

} // namespace duplexweave
