#pragma once

#include "facecascade/types.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace facecascade::detail {

class ByteWriter {
public:
	void bytes(const void* data, std::size_t size)
	{
		const auto* p = static_cast<const std::uint8_t*>(data);
		buf_.insert(buf_.end(), p, p + size);
	}

	void u32(std::uint32_t v)
	{
		for (int i = 0; i < 4; ++i)
			buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
	}

	void u64(std::uint64_t v)
	{
		for (int i = 0; i < 8; ++i)
			buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
	}

	void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

	template <typename Range>
	void f64s(const Range& r)
	{
		for (double v : r)
			f64(v);
	}

	void str(const std::string& s)
	{
		u32(static_cast<std::uint32_t>(s.size()));
		bytes(s.data(), s.size());
	}

	std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
	std::vector<std::uint8_t> buf_;
};

/// Same interface as ByteWriter, but folds the stream into a 64-bit FNV-1a
/// hash instead of buffering it.
class HashWriter {
public:
	void bytes(const void* data, std::size_t size)
	{
		const auto* p = static_cast<const std::uint8_t*>(data);
		for (std::size_t i = 0; i < size; ++i)
			byte(p[i]);
	}

	void u32(std::uint32_t v)
	{
		for (int i = 0; i < 4; ++i)
			byte(static_cast<std::uint8_t>(v >> (8 * i)));
	}

	void u64(std::uint64_t v)
	{
		for (int i = 0; i < 8; ++i)
			byte(static_cast<std::uint8_t>(v >> (8 * i)));
	}

	void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

	template <typename Range>
	void f64s(const Range& r)
	{
		for (double v : r)
			f64(v);
	}

	std::uint64_t value() const { return h_; }

private:
	void byte(std::uint8_t b)
	{
		h_ ^= b;
		h_ *= 0x100000001b3ULL;
	}

	std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

class ByteReader {
public:
	explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

	void expect(std::size_t n, const std::string& field) const
	{
		if (data_.size() - pos_ < n)
			throw ParseError(field, "unexpected end of file");
	}

	void bytes(void* out, std::size_t n, const std::string& field)
	{
		expect(n, field);
		std::memcpy(out, data_.data() + pos_, n);
		pos_ += n;
	}

	std::uint32_t u32(const std::string& field)
	{
		expect(4, field);
		std::uint32_t v = 0;
		for (int i = 0; i < 4; ++i)
			v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
		pos_ += 4;
		return v;
	}

	std::uint64_t u64(const std::string& field)
	{
		expect(8, field);
		std::uint64_t v = 0;
		for (int i = 0; i < 8; ++i)
			v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
		pos_ += 8;
		return v;
	}

	double f64(const std::string& field) { return std::bit_cast<double>(u64(field)); }

	double finite_f64(const std::string& field)
	{
		double v = f64(field);
		if (!std::isfinite(v))
			throw ParseError(field, "non-finite value");
		return v;
	}

	Vec vec(std::size_t n, const std::string& field)
	{
		expect(8 * n, field);
		Vec v(static_cast<Eigen::Index>(n));
		for (std::size_t i = 0; i < n; ++i)
			v[static_cast<Eigen::Index>(i)] = finite_f64(field);
		return v;
	}

	std::string str(const std::string& field)
	{
		std::uint32_t n = u32(field);
		expect(n, field);
		std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
		pos_ += n;
		return s;
	}

	bool at_end() const { return pos_ == data_.size(); }

private:
	std::span<const std::uint8_t> data_;
	std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes)
{
	std::uint64_t h = 0xcbf29ce484222325ULL;
	for (auto b : bytes) {
		h ^= b;
		h *= 0x100000001b3ULL;
	}
	return h;
}

} // namespace facecascade::detail
