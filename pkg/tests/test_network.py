from ipaddress import IPv4Network

import pytest
from conftest import ROOT
from helpers import model

from labbench.errors import ValidationError
from labbench.topology import build_network, parse_topology

CORPUS = ROOT / "scenarios" / "corpus"


def load(name):
    return build_network(parse_topology((CORPUS / name).read_text()))


def issues(text):
    with pytest.raises(ValidationError) as info:
        model(text)
    return info.value.issues


def test_figure5_domains_and_subnets():
    m = load("figure5.cfg")
    assert set(m.vlan_domains) == {100, 101, 102}
    for v in (100, 101, 102):
        assert ("R1", f"FastEthernet0/1.{v}") in m.vlan_domains[v]
        assert ("SW1", "FastEthernet0/1") in m.vlan_domains[v]
    assert set(m.subnets) == {IPv4Network(f"192.168.{v}.0/24") for v in (100, 101, 102)}


def test_single_host_no_links():
    m = load("single_host.cfg")
    assert list(m.subnets) == [IPv4Network("10.9.9.0/24")]
    assert m.vlan_domains == {}
    assert m.warnings == ["interface H1:eth0 is in no link"]


def test_empty_model():
    m = load("empty.cfg")
    assert m.devices == {} and m.subnets == {}


def test_duplicate_ip_names_both_interfaces():
    with pytest.raises(ValidationError) as info:
        load("dup_ip.cfg")
    (issue,) = info.value.issues
    assert "duplicate IP 192.168.100.1" in issue
    assert "R1:Gi0/0" in issue and "R2:Gi0/0" in issue


def test_addresses_are_unique_across_domains():
    found = issues("""
device A host
interface e0
 ip address 10.0.0.1 255.255.255.0
device B host
interface e0
 ip address 10.0.0.1 255.255.255.0
""")
    assert any("duplicate IP 10.0.0.1" in i for i in found)


_ROUTER_TRUNK = """
device R1 router
interface Fa0/1
interface Fa0/1.100
 encapsulation dot1q 100 native
 ip address 192.168.100.1 255.255.255.0
interface Fa0/1.200
 encapsulation dot1q 200
 ip address 192.168.200.1 255.255.255.0
device SW1 switch
interface Fa0/1
 switchport mode trunk
 switchport trunk allowed vlan {allowed}
link R1:Fa0/1 SW1:Fa0/1 bandwidth 100mbps
"""


def test_vlan_not_allowed_on_trunk_is_flagged():
    found = issues(_ROUTER_TRUNK.format(allowed="100"))
    assert any("VLAN 200" in i and "not allowed" in i for i in found)


def test_vlan_allowed_joins_domain():
    m = model(_ROUTER_TRUNK.format(allowed="100,200"))
    assert set(m.vlan_domains) == {100, 200}


def test_subinterface_parent_in_no_link():
    text = _ROUTER_TRUNK.format(allowed="100,200").split("device SW1")[0]
    found = issues(text)
    assert any("interface in no link" in i for i in found)


def test_untagged_port_facing_trunk():
    found = issues("""
device R1 router
interface Gi0/0
 ip address 10.0.0.1 255.255.255.0
device SW1 switch
interface Fa0/1
 switchport mode trunk
 switchport trunk allowed vlan 10
link R1:Gi0/0 SW1:Fa0/1 bandwidth 1gbps
""")
    assert any("untagged interface R1:Gi0/0" in i for i in found)


def test_native_vlan_conflict():
    found = issues("""
device R1 router
interface Gi0/0
 ip address 10.0.0.1 255.255.255.0
interface Gi0/0.5
 encapsulation dot1q 5 native
 ip address 10.0.5.1 255.255.255.0
device R2 router
interface Gi0/0
 ip address 10.0.0.2 255.255.255.0
link R1:Gi0/0 R2:Gi0/0 bandwidth 1gbps
""")
    assert any("native-VLAN conflict" in i for i in found)


_SERVER = """
device S server
interface e0
 ip address 10.0.0.2 255.255.255.0
cores 4
ram 4gb
device H host
interface e0
 ip address 10.0.0.1 255.255.255.0
link H:e0 S:e0 bandwidth 1gbps
"""


def test_vm_overallocation():
    found = issues(_SERVER + "vm A host S cores 3 ram 3gb ip 10.0.0.3\nvm B host S cores 2 ram 2gb ip 10.0.0.4\n")
    assert any("allocate 5 cores of 4" in i for i in found)
    assert any("bytes RAM" in i for i in found)


def test_vm_address_off_subnet_and_bad_host():
    found = issues(_SERVER + "vm A host S cores 1 ram 1gb ip 10.9.0.3\nvm B host H cores 1 ram 1gb ip 10.0.0.4\n")
    assert any("is on no subnet of S" in i for i in found)
    assert any("host H is not a declared server" in i for i in found)


def test_vm_addresses_owned_by_host_interface():
    m = model(_SERVER + "vm A host S cores 1 ram 1gb ip 10.0.0.3\n")
    owner = {a: o for a, o in m.addr_owner.items()}
    assert owner[int(m.doc.vm("A").address)] == ("S", "e0")


def test_every_issue_reported_together():
    found = issues(_SERVER + "vm A host S cores 9 ram 1gb ip 10.9.0.3\nvm B host H cores 1 ram 1gb ip 10.0.0.2\n")
    assert len(found) >= 2


def test_l2_path_crosses_switches_only():
    m = load("figure3.cfg")
    hops = m.l2_path(("PC1", "eth0"), ("R0", "FastEthernet0/0"))
    assert len(hops) == 2
    assert m.l2_path(("PC1", "eth0"), ("R1", "Serial0/0")) is None
