#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "biphoton/frames.hpp"
#include "biphoton/parallel.hpp"

namespace biphoton {

// BPFS frame-stack container, little-endian:
//   magic "BPFS" | u16 version=1 | u16 width | u16 height | u64 frame count |
//   u64 seed | u8 mode (0 dark, 1 near, 2 far) | 7 reserved zero bytes |
//   frames as row-major u16 grids.
// Fixed-size frames make the format seekable, so analysis can stream it.
namespace bpfs {

constexpr std::array<char, 4> kMagic = {'B', 'P', 'F', 'S'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 34;

struct Header {
    std::uint16_t version = kVersion;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::uint64_t frame_count = 0;
    std::uint64_t seed = 0;
    StackKind kind = StackKind::Dark;

    std::size_t frame_bytes() const { return std::size_t(width) * height * 2; }
};

namespace detail {

inline void put_u16(char* p, std::uint16_t v) {
    p[0] = char(v & 0xFF);
    p[1] = char(v >> 8);
}

inline void put_u64(char* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = char((v >> (8 * i)) & 0xFF);
}

inline std::uint16_t get_u16(const char* p) {
    return std::uint16_t(std::uint8_t(p[0])) | std::uint16_t(std::uint8_t(p[1])) << 8;
}

inline std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(p[i])) << (8 * i);
    return v;
}

inline void encode_frame(const Frame& frame, std::string& buf) {
    buf.resize(frame.data.size() * 2);
    for (std::size_t i = 0; i < frame.data.size(); ++i) put_u16(&buf[i * 2], frame.data[i]);
}

inline void decode_frame(const char* buf, Frame& frame) {
    for (std::size_t i = 0; i < frame.data.size(); ++i) frame.data[i] = get_u16(buf + i * 2);
}

} // namespace detail

inline void write_header(std::ostream& os, const Header& h) {
    char buf[kHeaderSize] = {};
    std::memcpy(buf, kMagic.data(), 4);
    detail::put_u16(buf + 4, h.version);
    detail::put_u16(buf + 6, h.width);
    detail::put_u16(buf + 8, h.height);
    detail::put_u64(buf + 10, h.frame_count);
    detail::put_u64(buf + 18, h.seed);
    buf[26] = char(std::uint8_t(h.kind));
    os.write(buf, kHeaderSize);
}

inline Header read_header(std::istream& is, const std::string& path) {
    char buf[kHeaderSize];
    is.read(buf, kHeaderSize);
    if (is.gcount() != std::streamsize(kHeaderSize))
        throw TruncationError(path + ": file shorter than the BPFS header");
    if (std::memcmp(buf, kMagic.data(), 4) != 0)
        throw FormatError(path + ": not a BPFS stack (bad magic)");
    Header h;
    h.version = detail::get_u16(buf + 4);
    if (h.version != kVersion)
        throw FormatError(path + ": unsupported BPFS version " + std::to_string(h.version));
    h.width = detail::get_u16(buf + 6);
    h.height = detail::get_u16(buf + 8);
    h.frame_count = detail::get_u64(buf + 10);
    h.seed = detail::get_u64(buf + 18);
    const std::uint8_t kind = std::uint8_t(buf[26]);
    if (kind > 2) throw FormatError(path + ": unknown stack mode tag");
    h.kind = StackKind(kind);
    if (h.width == 0 || h.height == 0) throw FormatError(path + ": zero-sized frames");
    return h;
}

} // namespace bpfs

/// Writes a stack; frames stream out in index order.
inline void write_stack(const std::string& path, const FrameStack& stack) {
    stack.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path + ": cannot open for writing");
    bpfs::Header h;
    h.width = stack.width;
    h.height = stack.height;
    h.frame_count = stack.frame_count();
    h.seed = stack.seed;
    h.kind = stack.kind;
    bpfs::write_header(os, h);
    std::string buf;
    for (const Frame& frame : stack.frames) {
        bpfs::detail::encode_frame(frame, buf);
        os.write(buf.data(), std::streamsize(buf.size()));
    }
    if (!os) throw IoError(path + ": write failed");
}

/// Streams a stack to disk in blocks: frame_fn(i) is called for i in [0, n)
/// (parallel within a block), frames land on disk in index order.
inline void write_stack_stream(const std::string& path, std::uint16_t width, std::uint16_t height,
                               StackKind kind, std::uint64_t seed, std::size_t n_frames,
                               const std::function<Frame(std::size_t)>& frame_fn,
                               unsigned workers = 1, std::size_t block = 4096) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(path + ": cannot open for writing");
    bpfs::Header h;
    h.width = width;
    h.height = height;
    h.frame_count = n_frames;
    h.seed = seed;
    h.kind = kind;
    bpfs::write_header(os, h);
    std::vector<Frame> frames;
    std::string buf;
    for (std::size_t lo = 0; lo < n_frames; lo += block) {
        const std::size_t hi = std::min(n_frames, lo + block);
        frames.assign(hi - lo, Frame());
        parallel_ranges(hi - lo, workers, [&](std::size_t a, std::size_t b) {
            for (std::size_t i = a; i < b; ++i) frames[i] = frame_fn(lo + i);
        });
        for (const Frame& f : frames) {
            if (f.width != width || f.height != height)
                throw ValidationError(path + ": generated frame has mismatched dimensions");
            bpfs::detail::encode_frame(f, buf);
            os.write(buf.data(), std::streamsize(buf.size()));
        }
    }
    if (!os) throw IoError(path + ": write failed");
}

/// Random-access reader over a BPFS file; each instance owns its own stream,
/// so workers can hold independent readers on one file.
class StackReader {
public:
    explicit StackReader(const std::string& path) : path_(path), is_(path, std::ios::binary) {
        if (!is_) throw IoError(path + ": cannot open for reading");
        header_ = bpfs::read_header(is_, path);
        is_.seekg(0, std::ios::end);
        const std::uint64_t payload = std::uint64_t(is_.tellg()) - bpfs::kHeaderSize;
        const std::uint64_t complete = payload / header_.frame_bytes();
        if (complete < header_.frame_count)
            throw TruncationError(path_ + ": header declares " +
                                  std::to_string(header_.frame_count) + " frames but only " +
                                  std::to_string(complete) + " are present");
    }

    const bpfs::Header& header() const { return header_; }
    std::size_t frame_count() const { return header_.frame_count; }

    Frame frame(std::size_t index) {
        if (index >= header_.frame_count)
            throw ValidationError(path_ + ": frame index out of range");
        const std::uint64_t off = bpfs::kHeaderSize + std::uint64_t(index) * header_.frame_bytes();
        is_.seekg(std::streamoff(off));
        buf_.resize(header_.frame_bytes());
        is_.read(buf_.data(), std::streamsize(buf_.size()));
        if (is_.gcount() != std::streamsize(buf_.size()))
            throw TruncationError(path_ + ": frame " + std::to_string(index) + " is truncated");
        Frame f(header_.width, header_.height);
        bpfs::detail::decode_frame(buf_.data(), f);
        return f;
    }

private:
    std::string path_;
    std::ifstream is_;
    bpfs::Header header_;
    std::string buf_;
};

/// Loads a whole stack into memory; round-trips write_stack bit-exactly.
inline FrameStack read_stack(const std::string& path) {
    StackReader reader(path);
    FrameStack stack;
    stack.width = reader.header().width;
    stack.height = reader.header().height;
    stack.kind = reader.header().kind;
    stack.seed = reader.header().seed;
    stack.frames.reserve(reader.frame_count());
    for (std::size_t i = 0; i < reader.frame_count(); ++i) stack.frames.push_back(reader.frame(i));
    return stack;
}

} // namespace biphoton
