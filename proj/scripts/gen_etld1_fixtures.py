#!/usr/bin/env python3
"""Writes tests/data/etld1_fixtures.tsv: URL, tab, expected registrable
domain (or ERROR), computed by the publicsuffixlist package against the
bundled snapshot."""
import ipaddress
import sys
from pathlib import Path
from urllib.parse import urlsplit

from publicsuffixlist import PublicSuffixList

URLS = [
    "https://a.b.example.co.uk/x.js",
    "https://example.com/",
    "https://co.uk/",
    "https://cdn.tracker.example/fp.js",
    "https://www.bbc.co.uk/news",
    "http://static.foo.com.au/lib.js?v=2",
    "https://sub.domain.example.org:8443/path",
    "https://user:pw@login.service.gov.uk/",
    "https://shop.example.co.jp/a",
    "https://a.b.c.kawasaki.jp/",
    "https://city.kawasaki.jp/",
    "https://foo.github.io/app.js",
    "https://github.io/",
    "https://x.y.blogspot.com/",
    "https://192.168.0.1/script.js",
    "https://[2001:db8::1]:8080/x.js",
    "https://EXAMPLE.NET/Upper.js",
    "https://www.example.com./trailing",
    "//protocol-relative.example.de/x.js",
    "https://a.b.c.d.example.ac.uk/",
    "https://test.s3.amazonaws.com/obj.js",
    "https://deep.sub.example.com.br/",
    "https://com/",
    "https://ads.example.xn--p1ai/",
    "https://t.example.cloudfront.net/x.js",
]


def host_of(url: str) -> str:
    host = urlsplit(url if "//" in url else "//" + url).hostname
    if host is None:
        raise ValueError(url)
    return host.rstrip(".")


def main(root: Path) -> None:
    psl = PublicSuffixList(open(root / "data" / "public_suffix_list.dat", "rb"))
    out = []
    for url in URLS:
        host = host_of(url)
        try:
            ipaddress.ip_address(host)
            expected = host
        except ValueError:
            expected = psl.privatesuffix(host) or "ERROR"
        out.append(f"{url}\t{expected}")
    (root / "tests" / "data" / "etld1_fixtures.tsv").write_text("\n".join(out) + "\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent)
