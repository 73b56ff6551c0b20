#!/usr/bin/env python3
# Regenerates seeds/seeds.json and capture/mixed.json from the seed files.
# mixed.json mimics `tshark -T json -x --no-duplicate-keys` output: each frame
# carries the dissection tree for matching plus <proto>_raw / frame_raw bytes.
import json, os, struct, glob

HERE = os.path.dirname(os.path.abspath(__file__))
SEEDS = os.path.join(HERE, 'seeds')
TYPES = json.load(open(os.path.join(HERE, '..', '..', 'data', 'message_types.json')))['types']

EXT = {0: 'Server Name', 5: 'Status Request', 10: 'Supported Groups', 11: 'Ec Point Formats',
       13: 'Signature Algorithms', 16: 'Application Layer Protocol Negotiation',
       18: 'Signed Certificate Timestamp', 23: 'Extended Master Secret', 27: 'Compress Certificate',
       35: 'Session Ticket', 41: 'Pre Shared Key', 43: 'Supported Versions',
       45: 'Psk Key Exchange Modes', 51: 'Key Share', 17513: 'Application Settings',
       0xfe0d: 'Encrypted Client Hello', 0xff01: 'Renegotiation Info'}
HTTP_KEYS = {'host': 'Host', 'user-agent': 'User-Agent', 'accept': 'Accept',
             'accept-encoding': 'Accept-Encoding', 'authorization': 'Authorization',
             'cache-control': 'http.cache_control', 'content-type': 'Content-Type',
             'content-length': 'Content-Length', 'date': 'Date', 'last-modified': 'Last-Modified',
             'server': 'Server', 'location': 'Location'}


def load(path):
    data = open(path, 'rb').read()
    if path.endswith('.hex'):
        return bytes.fromhex(data.decode().strip())
    return data


def client_hello_exts(b):
    p = 9 + 2 + 32
    p += 1 + b[p]
    p += 2 + int.from_bytes(b[p:p + 2], 'big')
    p += 1 + b[p]
    out = []
    if p >= len(b):
        return out
    p += 2
    while p + 4 <= len(b):
        t = int.from_bytes(b[p:p + 2], 'big')
        n = int.from_bytes(b[p + 2:p + 4], 'big')
        out.append((t, b[p + 4:p + 4 + n]))
        p += 4 + n
    return out


def grease(t):
    return (t & 0x0f0f) == 0x0a0a and (t >> 8) == (t & 0xff)


def tls_types(b):
    exts = [t for t, _ in client_hello_exts(b)]
    out = []
    if not exts:
        out.append('ClientHello with No Extension')
    for t in exts:
        label = 'Reserved' if grease(t) else EXT.get(t)
        if label:
            name = 'ClientHello with %s Extension' % label
            if name not in out:
                out.append(name)
    return out


def http_headers(b):
    head = b.split(b'\r\n\r\n', 1)[0].decode()
    lines = head.split('\r\n')
    return lines[0], [tuple(x.split(':', 1)) for x in lines[1:]]


def http_types(b):
    _, hdrs = http_headers(b)
    out = ['http request with request.line header'] if hdrs else []
    for name, _ in hdrs:
        k = HTTP_KEYS.get(name.strip().lower())
        if k:
            out.append('http request with %s header' % k)
    return out


def dns_types(b):
    return ['DNS Response' if b[2] & 0x80 else 'DNS Query']


def seed_manifest():
    seeds = []
    for proto, sub, fn in (('DNS', 'dns', dns_types), ('HTTP1', 'http', http_types),
                           ('TLS13', 'tls', tls_types)):
        for path in sorted(glob.glob(os.path.join(SEEDS, sub, '*'))):
            b = load(path)
            for t in fn(b):
                seeds.append({'file': os.path.relpath(path, SEEDS), 'protocol': proto, 'message_type': t})
    order = {t['message_type']: i for i, t in enumerate(TYPES)}
    seeds.sort(key=lambda s: order[s['message_type']])
    json.dump({'schema_version': 1, 'seeds': seeds}, open(os.path.join(SEEDS, 'seeds.json'), 'w'), indent=2)
    open(os.path.join(SEEDS, 'seeds.json'), 'a').write('\n')


def eth_ip(proto, payload, sport, dport, ipv6=False):
    eth = bytes.fromhex('0242ac110002' '0242ac110003') + (b'\x86\xdd' if ipv6 else b'\x08\x00')
    if proto == 'udp':
        l4 = struct.pack('!HHHH', sport, dport, 8 + len(payload), 0)
    else:
        l4 = struct.pack('!HHIIBBHHH', sport, dport, 1000, 2000, 0x50, 0x18, 502, 0, 0)
    body = l4 + payload
    if ipv6:
        ip = struct.pack('!IHBB', 0x60000000, len(body), 17 if proto == 'udp' else 6, 64) + bytes(15) + b'\x01' + bytes(15) + b'\x02'
    else:
        ip = struct.pack('!BBHHHBBH4s4s', 0x45, 0, 20 + len(body), 1, 0, 64,
                         17 if proto == 'udp' else 6, 0, bytes([10, 0, 0, 1]), bytes([10, 0, 0, 2]))
    return eth + ip + body, len(eth) + len(ip) + (8 if proto == 'udp' else 20)


def frame(num, protos, raw, off, layer_name, layer, layer_raw):
    layers = {
        'frame': {'frame.number': str(num), 'frame.len': str(len(raw)), 'frame.protocols': protos},
        'eth': {'eth.type': '0x0800'},
        'ip': {'ip.version': '4'},
    }
    layers[layer_name] = layer
    layers[layer_name + '_raw'] = [layer_raw.hex(), off, len(layer_raw), 0, 1]
    layers['frame_raw'] = [raw.hex(), 0, len(raw), 0, 1]
    return {'_index': 'packets-2024-10-15', '_type': 'doc', '_score': None, '_source': {'layers': layers}}


def capture():
    frames = []
    n = 1
    for path in sorted(glob.glob(os.path.join(SEEDS, 'dns', '*.hex'))):
        b = load(path)
        raw, off = eth_ip('udp', b, 53000 + n, 53) if not b[2] & 0x80 else eth_ip('udp', b, 53, 53000 + n)
        layer = {'dns.id': '0x%04x' % int.from_bytes(b[:2], 'big'),
                 'dns.flags': '0x%04x' % int.from_bytes(b[2:4], 'big'),
                 'dns.flags_tree': {'dns.flags.response': '1' if b[2] & 0x80 else '0'},
                 'dns.count.queries': str(int.from_bytes(b[4:6], 'big'))}
        frames.append(frame(n, 'eth:ethertype:ip:udp:dns', raw, off, 'dns', layer, b))
        n += 1
    for path in sorted(glob.glob(os.path.join(SEEDS, 'tls', '*.hex'))):
        b = load(path)
        raw, off = eth_ip('tcp', b, 40000 + n, 443)
        exts = [{'tls.handshake.extension.type': str(t), 'tls.handshake.extension.len': str(len(d))}
                for t, d in client_hello_exts(b)]
        layer = {'tls.record': {'tls.record.content_type': '22',
                                'tls.record.length': str(len(b) - 5),
                                'tls.handshake': {'tls.handshake.type': '1',
                                                  'tls.handshake.extension': exts}}}
        frames.append(frame(n, 'eth:ethertype:ip:tcp:tls', raw, off, 'tls', layer, b))
        n += 1
    for path in sorted(glob.glob(os.path.join(SEEDS, 'http', '*.bin'))):
        b = load(path)
        raw, off = eth_ip('tcp', b, 41000 + n, 80)
        first, hdrs = http_headers(b)
        method, target, version = first.split(' ')
        layer = {first + '\\r\\n': {'http.request.method': method, 'http.request.uri': target,
                                   'http.request.version': version},
                 'http.request.line': [h[0] + ':' + h[1] + '\\r\\n' for h in hdrs]}
        for name, value in hdrs:
            key = name.strip().lower()
            k = {'content-length': 'http.content_length_header'}.get(key, 'http.' + key.replace('-', '_'))
            layer[k] = value.strip()
        head_len = b.index(b'\r\n\r\n') + 4
        frames.append(frame(n, 'eth:ethertype:ip:tcp:http', raw, off, 'http', layer, b[:head_len]))
        n += 1
    # Non-matching traffic: an ARP-ish frame and an IPv6 ICMPv6 echo.
    frames.append({'_index': 'packets-2024-10-15', '_type': 'doc', '_score': None,
                   '_source': {'layers': {'frame': {'frame.number': str(n), 'frame.protocols': 'eth:ethertype:arp'},
                                          'arp': {'arp.opcode': '1'}}}})
    n += 1
    echo = bytes([128, 0, 0, 0, 0, 1, 0, 1]) + b'ping'
    raw, off = eth_ip('udp', echo, 1, 1, ipv6=True)
    frames.append({'_index': 'packets-2024-10-15', '_type': 'doc', '_score': None,
                   '_source': {'layers': {'frame': {'frame.number': str(n), 'frame.protocols': 'eth:ethertype:ipv6:icmpv6'},
                                          'ipv6': {'ipv6.nxt': '58'}, 'icmpv6': {'icmpv6.type': '128'}}}})
    os.makedirs(os.path.join(HERE, 'capture'), exist_ok=True)
    json.dump(frames, open(os.path.join(HERE, 'capture', 'mixed.json'), 'w'), indent=2)


if __name__ == '__main__':
    seed_manifest()
    capture()
