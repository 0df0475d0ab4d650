#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "duplexweave/sequence.hpp"

namespace duplexweave {

// Maps transcript words to text-token ids. Implementations must be safe for
// concurrent const use.
class TextTokenizer {
public:
    virtual ~TextTokenizer() = default;

    virtual std::vector<TokenId> encode_word(std::string_view word) const = 0;

    // Token placed between consecutive words of a turn, if any.
    virtual std::optional<TokenId> separator() const = 0;

    std::vector<TokenId> encode_words(std::span<const std::string> words) const;
};

// One token per UTF-8 byte at text_base + byte; words separated by the space
// byte.
class ByteTokenizer final : public TextTokenizer {
public:
    explicit ByteTokenizer(TokenId text_base) : base_(text_base) {}

    std::vector<TokenId> encode_word(std::string_view word) const override;
    std::optional<TokenId> separator() const override { return base_ + 0x20; }

    std::string decode(std::span<const TokenId> ids) const;

private:
    TokenId base_;
};

// Word table loaded from JSON: {"separator": id|null, "words": {"w": [ids]}}.
// Words missing from the table fall back to bytes.
class TableTokenizer final : public TextTokenizer {
public:
    TableTokenizer(std::map<std::string, std::vector<TokenId>> table, std::optional<TokenId> separator,
                   TokenId fallback_base);

    static TableTokenizer load(const std::filesystem::path& path, TokenId fallback_base);

    std::vector<TokenId> encode_word(std::string_view word) const override;
    std::optional<TokenId> separator() const override { return separator_; }

private:
    std::map<std::string, std::vector<TokenId>, std::less<>> table_;
    std::optional<TokenId> separator_;
    ByteTokenizer fallback_;
};

} // namespace duplexweave
